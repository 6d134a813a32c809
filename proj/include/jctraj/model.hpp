#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <vector>

#include "params.hpp"
#include "space.hpp"

namespace jctraj {

using SparseOp = Eigen::SparseMatrix<Complex>;

inline Operator hamiltonian(const SystemParams& p, const Space& sp) {
    p.validate();
    const OperatorSet ops = operator_set(sp);
    return p.delta_atom * (ops.sp * ops.sm) + p.delta_cavity * ops.n_photon +
           p.g * (ops.a_dag * ops.sm + ops.sp * ops.a) +
           Complex(0.0, p.drive) * (ops.a_dag - ops.a);
}

// Collapse operators of the master equation, in a fixed order: cavity decay
// first (the homodyne-monitored channel), then atomic decay.
inline std::vector<Operator> collapse_operators(const SystemParams& p, const Space& sp) {
    const OperatorSet ops = operator_set(sp);
    return {std::sqrt(2.0 * p.kappa) * ops.a, std::sqrt(2.0 * p.gamma_perp) * ops.sm};
}

// Lindblad right-hand side in operator form: -i[H,rho] + sum_c (c rho c^dag
// - 1/2 {c^dag c, rho}).  Reference implementation for tests and small-space
// propagation checks.
inline Operator lindblad_rhs(const SystemParams& p, const Space& sp, const Operator& rho) {
    const Operator H = hamiltonian(p, sp);
    Operator out = Complex(0.0, -1.0) * (H * rho - rho * H);
    for (const Operator& c : collapse_operators(p, sp)) {
        const Operator cd_c = c.adjoint() * c;
        out += c * rho * c.adjoint() - 0.5 * (cd_c * rho + rho * cd_c);
    }
    return out;
}

namespace detail {

inline SparseOp sparse_kron(const SparseOp& a, const SparseOp& b) {
    SparseOp out(a.rows() * b.rows(), a.cols() * b.cols());
    std::vector<Eigen::Triplet<Complex>> trip;
    trip.reserve(static_cast<std::size_t>(a.nonZeros()) * static_cast<std::size_t>(b.nonZeros()));
    for (int ka = 0; ka < a.outerSize(); ++ka) {
        for (SparseOp::InnerIterator ia(a, ka); ia; ++ia) {
            for (int kb = 0; kb < b.outerSize(); ++kb) {
                for (SparseOp::InnerIterator ib(b, kb); ib; ++ib) {
                    trip.emplace_back(ia.row() * b.rows() + ib.row(),
                                      ia.col() * b.cols() + ib.col(),
                                      ia.value() * ib.value());
                }
            }
        }
    }
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

}  // namespace detail

// Liouvillian as a sparse superoperator on column-stacked density matrices:
// vec(A rho B) = (B^T kron A) vec(rho), so
//   L = -i (I kron H - H^T kron I)
//       + sum_c [ conj(c) kron c - 1/2 I kron (c^dag c) - 1/2 (c^dag c)^T kron I ].
inline SparseOp liouvillian_sparse(const SystemParams& p, const Space& sp) {
    const int d = sp.dim();
    SparseOp eye(d, d);
    eye.setIdentity();
    const SparseOp h = hamiltonian(p, sp).sparseView();
    const SparseOp ht = SparseOp(h.transpose());
    SparseOp L = Complex(0.0, -1.0) * (detail::sparse_kron(eye, h) - detail::sparse_kron(ht, eye));
    for (const Operator& c_dense : collapse_operators(p, sp)) {
        const SparseOp c = c_dense.sparseView();
        const SparseOp c_conj = c.conjugate();
        const SparseOp cd_c = (c_dense.adjoint() * c_dense).sparseView();
        const SparseOp cd_c_t = SparseOp(cd_c.transpose());
        L += detail::sparse_kron(c_conj, c);
        L -= 0.5 * detail::sparse_kron(eye, cd_c);
        L -= 0.5 * detail::sparse_kron(cd_c_t, eye);
    }
    L.makeCompressed();
    return L;
}

// Dense superoperator, for algebra on small spaces.  dim^2 x dim^2 memory,
// hence the guard; large-space work goes through steady_state and
// propagate_density, which keep the sparse form internally.
inline Operator liouvillian(const SystemParams& p, const Space& sp) {
    if (sp.dim() > 64)
        throw std::invalid_argument(
            "liouvillian: dense superoperator is limited to dim <= 64");
    return Operator(liouvillian_sparse(p, sp));
}

struct SteadyStateInfo {
    double residual = 0.0;  // ||L_hat vec(rho)||_2 / ||vec(rho)||_2, L_hat = L / rate_scale
    int dim = 0;
};

namespace detail {

// Solve M x = e_row where M is L with one row replaced by the trace
// functional.  The replaced system is nonsingular exactly when the trace-one
// steady state is unique.
inline Eigen::VectorXcd steady_solve_replaced_row(const SparseOp& L, int d, int row) {
    const int D = d * d;
    std::vector<Eigen::Triplet<Complex>> trip;
    trip.reserve(static_cast<std::size_t>(L.nonZeros()) + d);
    for (int k = 0; k < L.outerSize(); ++k) {
        for (SparseOp::InnerIterator it(L, k); it; ++it) {
            if (it.row() != row) trip.emplace_back(it.row(), it.col(), it.value());
        }
    }
    for (int n = 0; n < d; ++n) trip.emplace_back(row, n * (d + 1), Complex(1.0, 0.0));
    SparseOp M(D, D);
    M.setFromTriplets(trip.begin(), trip.end());
    M.makeCompressed();

    Eigen::SparseLU<SparseOp> lu;
    lu.analyzePattern(M);
    lu.factorize(M);
    if (lu.info() != Eigen::Success)
        throw degenerate_steady_state(
            "steady_state: trace-replaced Liouvillian is singular; the steady "
            "state is not unique");
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(D);
    b(row) = 1.0;
    return lu.solve(b);
}

}  // namespace detail

// Unique steady state of the master equation by direct sparse solve of
// L vec(rho) = 0 with the trace condition substituted for one row.  The
// generator is nondimensionalized by rate_scale() so the residual tolerance
// (1e-8) is meaningful regardless of SI magnitudes.  Uniqueness is
// cross-checked by re-solving with a different replaced row on spaces small
// enough for a second factorization to be cheap.
inline QuantumState steady_state(const SystemParams& p, const Space& sp,
                                 SteadyStateInfo* info = nullptr) {
    p.validate();
    if (!(p.kappa + p.gamma_perp > 0.0))
        throw std::invalid_argument("steady_state: needs some dissipation (kappa or gamma_perp > 0)");
    const double w0 = p.rate_scale();
    SparseOp L = liouvillian_sparse(p, sp);
    L *= Complex(1.0 / w0, 0.0);

    const int d = sp.dim();
    Eigen::VectorXcd x = detail::steady_solve_replaced_row(L, d, 0);

    Complex tr = 0.0;
    for (int n = 0; n < d; ++n) tr += x(n * (d + 1));
    if (std::abs(tr) < 1e-12)
        throw degenerate_steady_state("steady_state: solution has vanishing trace");
    x /= tr;

    if (d * d <= 20000) {
        // Cross-check uniqueness: a second replaced row must give the same
        // kernel vector.
        Eigen::VectorXcd x2 = detail::steady_solve_replaced_row(L, d, d + 1);
        Complex tr2 = 0.0;
        for (int n = 0; n < d; ++n) tr2 += x2(n * (d + 1));
        if (std::abs(tr2) < 1e-12 || (x - x2 / tr2).cwiseAbs().maxCoeff() > 1e-6)
            throw degenerate_steady_state(
                "steady_state: different trace rows give different kernel "
                "vectors; the steady state is not unique");
    }

    const double residual = (L * x).norm() / x.norm();
    if (!(residual <= 1e-8))
        throw convergence_error("steady_state: residual " + std::to_string(residual) +
                                " exceeds 1e-8; increase n_max or check conditioning");

    Operator rho(d, d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) rho(i, j) = x(j * d + i);
    rho = 0.5 * (rho + rho.adjoint()).eval();

    if (info) {
        info->residual = residual;
        info->dim = d;
    }
    return density_state(sp, rho);
}

// Master-equation propagation: RK4 on the sparse Liouvillian with the step
// bounded by the Gershgorin estimate of the spectral radius.  Returns the
// state at each requested time (strictly increasing, first >= 0), starting
// from `initial` at t = 0.
// `max_step` optionally caps the internal step below the stability bound
// (0 = automatic); tighten it when fourth-order accuracy over long coherent
// evolutions matters more than speed.
inline std::vector<QuantumState> propagate_density(const SystemParams& p, const Space& sp,
                                                   const QuantumState& initial,
                                                   const std::vector<double>& times,
                                                   double max_step = 0.0) {
    p.validate();
    if (times.empty()) throw std::invalid_argument("propagate_density: no times requested");
    if (max_step < 0.0) throw std::invalid_argument("propagate_density: max_step must be >= 0");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] >= 0.0) || (i > 0 && !(times[i] > times[i - 1])))
            throw std::invalid_argument("propagate_density: times must be nonnegative and increasing");
    }
    const SparseOp L = liouvillian_sparse(p, sp);

    // Gershgorin bound on |lambda| via column sums (spectrum of L^T).
    double bound = 0.0;
    Eigen::VectorXd colsum = Eigen::VectorXd::Zero(L.cols());
    for (int k = 0; k < L.outerSize(); ++k)
        for (SparseOp::InnerIterator it(L, k); it; ++it) colsum(it.col()) += std::abs(it.value());
    bound = colsum.maxCoeff();
    if (!(bound > 0.0)) bound = p.rate_scale();
    double dt_max = 1.0 / bound;  // RK4 stability margin ~2.8 over this
    if (max_step > 0.0) dt_max = std::min(dt_max, max_step);

    const int d = sp.dim();
    Operator rho = to_density(initial);
    Eigen::Map<Eigen::VectorXcd> v(rho.data(), d * d);

    std::vector<QuantumState> out;
    out.reserve(times.size());
    double t = 0.0;
    Eigen::VectorXcd k1(d * d), k2(d * d), k3(d * d), k4(d * d), tmp(d * d);
    for (double target : times) {
        const double span = target - t;
        const int n_steps = span > 0.0 ? static_cast<int>(std::ceil(span / dt_max)) : 0;
        const double dt = n_steps > 0 ? span / n_steps : 0.0;
        for (int s = 0; s < n_steps; ++s) {
            k1.noalias() = L * v;
            tmp = v + (0.5 * dt) * k1;
            k2.noalias() = L * tmp;
            tmp = v + (0.5 * dt) * k2;
            k3.noalias() = L * tmp;
            tmp = v + dt * k3;
            k4.noalias() = L * tmp;
            v += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        t = target;
        Operator snap = rho;
        snap = 0.5 * (snap + snap.adjoint()).eval();
        const double tr = snap.trace().real();
        if (!(std::abs(tr - 1.0) < 1e-6))
            throw convergence_error("propagate_density: trace drifted to " + std::to_string(tr));
        snap /= tr;
        QuantumState st;
        st.space = sp;
        st.rho = std::move(snap);
        out.push_back(std::move(st));
    }
    return out;
}

}  // namespace jctraj
