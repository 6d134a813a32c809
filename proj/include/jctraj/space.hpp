#pragma once

#include <Eigen/Dense>
#include <complex>
#include <iostream>

#include "errors.hpp"

namespace jctraj {

using Complex = std::complex<double>;
using Ket = Eigen::VectorXcd;
using Operator = Eigen::MatrixXcd;

// Composite Hilbert space of one cavity mode truncated at Fock level n_max
// and one two-level atom.  The atom index varies fastest: basis state |n, s>
// sits at composite index 2n + s, with s = 0 ground and s = 1 excited.  Every
// single-excitation operator is then pentadiagonal (offsets 0, +-1, +-2),
// which downstream integrators exploit.
struct Space {
    int n_max = 0;
    int dim() const { return 2 * (n_max + 1); }
    int index(int n, int s) const { return 2 * n + s; }
};

inline Space build_space(int n_max) {
    if (n_max < 1) throw std::invalid_argument("build_space: n_max must be >= 1");
    return Space{n_max};
}

// Cavity and atom operators on the composite space, dense.
// Quadratures follow X = (a + a^dag)/2, Y = (a - a^dag)/2i, so a coherent
// state alpha has <X> = Re alpha, <Y> = Im alpha and vacuum variance 1/4.
struct OperatorSet {
    Operator a, a_dag, n_photon;
    Operator sm, sp, sz;  // atom lowering |g><e|, raising, inversion
    Operator x, y;
    Operator id;
};

inline OperatorSet operator_set(const Space& sp) {
    const int d = sp.dim();
    OperatorSet ops;
    ops.a = Operator::Zero(d, d);
    ops.sm = Operator::Zero(d, d);
    ops.sz = Operator::Zero(d, d);
    for (int n = 0; n <= sp.n_max; ++n) {
        for (int s = 0; s <= 1; ++s) {
            if (n >= 1) ops.a(sp.index(n - 1, s), sp.index(n, s)) = std::sqrt(double(n));
            ops.sz(sp.index(n, s), sp.index(n, s)) = s ? 1.0 : -1.0;
        }
        ops.sm(sp.index(n, 0), sp.index(n, 1)) = 1.0;
    }
    ops.a_dag = ops.a.adjoint();
    ops.sp = ops.sm.adjoint();
    ops.n_photon = ops.a_dag * ops.a;
    ops.x = 0.5 * (ops.a + ops.a_dag);
    ops.y = Complex(0.0, -0.5) * (ops.a - ops.a_dag);
    ops.id = Operator::Identity(d, d);
    return ops;
}

// Pure or mixed state on a Space.  Exactly one of `ket` / `rho` is populated.
struct QuantumState {
    Space space;
    Ket ket;       // size dim if pure, 0 otherwise
    Operator rho;  // dim x dim if mixed, 0x0 otherwise
    bool pure() const { return ket.size() > 0; }
};

inline QuantumState ket_state(const Space& sp, Ket psi) {
    if (psi.size() != sp.dim())
        throw std::invalid_argument("ket_state: vector does not match space dimension");
    QuantumState st;
    st.space = sp;
    st.ket = std::move(psi);
    return st;
}

inline QuantumState fock_state(const Space& sp, int n, int s) {
    if (n < 0 || n > sp.n_max || s < 0 || s > 1)
        throw std::invalid_argument("fock_state: label out of range");
    Ket psi = Ket::Zero(sp.dim());
    psi(sp.index(n, s)) = 1.0;
    return ket_state(sp, std::move(psi));
}

// Truncated coherent state in the cavity, atom in the ground state,
// renormalized on the truncated ladder.  Coefficients by upward recurrence;
// exact up to truncation weight.
inline QuantumState coherent_ground(const Space& sp, Complex alpha) {
    Ket psi = Ket::Zero(sp.dim());
    Complex c = std::exp(-0.5 * std::norm(alpha));
    for (int n = 0; n <= sp.n_max; ++n) {
        psi(sp.index(n, 0)) = c;
        c *= alpha / std::sqrt(double(n + 1));
    }
    psi /= psi.norm();
    return ket_state(sp, std::move(psi));
}

// Density state from a matrix.  Requires Hermiticity within 1e-12 (relative
// to the largest entry) and eigenvalues >= -1e-10; smaller negative
// eigenvalues are clipped to zero with a warning, then the trace is
// renormalized to one.
inline QuantumState density_state(const Space& sp, Operator rho_in) {
    const int d = sp.dim();
    if (rho_in.rows() != d || rho_in.cols() != d)
        throw std::invalid_argument("density_state: matrix does not match space dimension");
    const double scale = rho_in.cwiseAbs().maxCoeff();
    if (scale <= 0.0) throw numerical_degeneracy("density_state: zero matrix");
    if ((rho_in - rho_in.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw std::invalid_argument("density_state: matrix is not Hermitian");
    Operator rho = 0.5 * (rho_in + rho_in.adjoint());

    Eigen::SelfAdjointEigenSolver<Operator> es(rho);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double tr = ev.sum();
    if (!(tr > 0.0)) throw numerical_degeneracy("density_state: non-positive trace");
    if (ev.minCoeff() < -1e-10 * tr) {
        std::cerr << "density_state: clipping negative eigenvalue "
                  << ev.minCoeff() / tr << " (tolerance -1e-10)\n";
        Eigen::VectorXd clipped = ev.cwiseMax(0.0);
        rho = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().adjoint();
    }
    rho /= rho.trace().real();

    QuantumState st;
    st.space = sp;
    st.rho = std::move(rho);
    return st;
}

inline Operator to_density(const QuantumState& st) {
    if (st.pure()) return st.ket * st.ket.adjoint();
    return st.rho;
}

// Restore unit norm (ket) or unit trace (density matrix) in place.
inline QuantumState& renormalize(QuantumState& st) {
    if (st.pure()) {
        const double nrm = st.ket.norm();
        if (!(nrm > 1e-150))
            throw numerical_degeneracy("renormalize: state norm vanished");
        st.ket /= nrm;
    } else {
        const double tr = st.rho.trace().real();
        if (!(tr > 1e-150))
            throw numerical_degeneracy("renormalize: state trace vanished");
        st.rho /= tr;
    }
    return st;
}

// <psi|O|psi> or Tr(rho O).  Assumes the state is normalized.
inline Complex expectation(const Operator& op, const QuantumState& st) {
    if (op.rows() != st.space.dim() || op.cols() != st.space.dim())
        throw std::invalid_argument("expectation: operator does not match space dimension");
    if (st.pure()) return st.ket.dot(op * st.ket);  // Eigen dot conjugates the left side
    return (st.rho * op).trace();
}

inline double expectation_real(const Operator& op, const QuantumState& st) {
    return expectation(op, st).real();
}

}  // namespace jctraj
