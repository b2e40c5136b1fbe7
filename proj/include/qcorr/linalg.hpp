#pragma once

// Small dense complex linear algebra for sensor (x) bath operators.
//
// Ordering convention used everywhere in qcorr: in a product space the
// LEFT factor is the slowest index, and joint operators are always built
// as sensor (x) bath. partial_trace_bath() relies on this.

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace qcorr {

using complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;

inline constexpr complex kI{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

namespace tol {
// structural checks (hermiticity of inputs, PSD, trace)
inline constexpr double kStructural = 1e-10;
// numerical identities (unitarity, exp(h,s) exp(h,-s) = I, ...)
inline constexpr double kIdentity = 1e-12;
// smallest eigenvalue tolerated in an evolved density matrix
inline constexpr double kNegativeEigenvalue = 1e-8;
}  // namespace tol

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline void require_square(const ComplexMatrix& m, const char* what) {
    if (m.rows() != m.cols() || m.rows() < 1) {
        throw DimensionError(std::string(what) + ": matrix must be square with dim >= 1, got " +
                             std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

inline void require_same_dim(const ComplexMatrix& a, const ComplexMatrix& b, const char* what) {
    require_square(a, what);
    require_square(b, what);
    if (a.rows() != b.rows()) {
        throw DimensionError(std::string(what) + ": dimension mismatch " +
                             std::to_string(a.rows()) + " vs " + std::to_string(b.rows()));
    }
}

inline ComplexMatrix identity(Eigen::Index dim) { return ComplexMatrix::Identity(dim, dim); }

inline ComplexMatrix zeros(Eigen::Index dim) { return ComplexMatrix::Zero(dim, dim); }

// Largest absolute entry; the norm used for every tolerance comparison.
inline double max_abs(const ComplexMatrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline bool is_hermitian(const ComplexMatrix& m, double tolerance = tol::kStructural) {
    return m.rows() == m.cols() && max_abs(m - m.adjoint()) <= tolerance;
}

inline bool is_unitary(const ComplexMatrix& m, double tolerance = tol::kIdentity) {
    return m.rows() == m.cols() && max_abs(m.adjoint() * m - identity(m.rows())) <= tolerance;
}

inline bool trace_one(const ComplexMatrix& m, double tolerance = tol::kStructural) {
    return m.rows() == m.cols() && std::abs(m.trace() - complex(1.0, 0.0)) <= tolerance;
}

// Eigenvalues of a Hermitian matrix in ascending order.
inline RealVector hermitian_eigenvalues(const ComplexMatrix& h) {
    require_square(h, "hermitian_eigenvalues");
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h, Eigen::EigenvaluesOnly);
    return solver.eigenvalues();
}

inline double min_eigenvalue(const ComplexMatrix& h) { return hermitian_eigenvalues(h)(0); }

inline bool is_psd(const ComplexMatrix& m, double tolerance = tol::kStructural) {
    return is_hermitian(m, tolerance) && min_eigenvalue(m) >= -tolerance;
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    require_square(a, "kron");
    require_square(b, "kron");
    const Eigen::Index na = a.rows();
    const Eigen::Index nb = b.rows();
    ComplexMatrix out(na * nb, na * nb);
    for (Eigen::Index i = 0; i < na; ++i) {
        for (Eigen::Index j = 0; j < na; ++j) {
            out.block(i * nb, j * nb, nb, nb) = a(i, j) * b;
        }
    }
    return out;
}

// exp(i * scale * h) for Hermitian h, through h = V diag(lambda) V^dagger.
// The result is unitary up to the accuracy of the eigenvectors.
inline ComplexMatrix expm_hermitian(const ComplexMatrix& h, double scale) {
    require_square(h, "expm_hermitian");
    if (!is_hermitian(h, tol::kStructural * std::max(1.0, max_abs(h)))) {
        throw std::invalid_argument("expm_hermitian: input is not Hermitian");
    }
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h);
    const ComplexMatrix& v = solver.eigenvectors();
    Eigen::VectorXcd phases(h.rows());
    for (Eigen::Index k = 0; k < h.rows(); ++k) {
        phases(k) = std::exp(kI * (scale * solver.eigenvalues()(k)));
    }
    return v * phases.asDiagonal() * v.adjoint();
}

// Tr_bath of an operator on sensor (x) bath.
inline ComplexMatrix partial_trace_bath(const ComplexMatrix& rho, Eigen::Index dim_sensor,
                                        Eigen::Index dim_bath) {
    require_square(rho, "partial_trace_bath");
    if (dim_sensor < 1 || dim_bath < 1 || rho.rows() != dim_sensor * dim_bath) {
        throw DimensionError("partial_trace_bath: dim(rho)=" + std::to_string(rho.rows()) +
                             " != " + std::to_string(dim_sensor) + "*" + std::to_string(dim_bath));
    }
    ComplexMatrix out(dim_sensor, dim_sensor);
    for (Eigen::Index i = 0; i < dim_sensor; ++i) {
        for (Eigen::Index j = 0; j < dim_sensor; ++j) {
            out(i, j) = rho.block(i * dim_bath, j * dim_bath, dim_bath, dim_bath).trace();
        }
    }
    return out;
}

inline ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) {
    require_same_dim(a, b, "commutator");
    return a * b - b * a;
}

inline ComplexMatrix anticommutator(const ComplexMatrix& a, const ComplexMatrix& b) {
    require_same_dim(a, b, "anticommutator");
    return a * b + b * a;
}

namespace pauli {

inline ComplexMatrix x() {
    ComplexMatrix m(2, 2);
    m << 0.0, 1.0, 1.0, 0.0;
    return m;
}

inline ComplexMatrix y() {
    ComplexMatrix m(2, 2);
    m << 0.0, -kI, kI, 0.0;
    return m;
}

inline ComplexMatrix z() {
    ComplexMatrix m(2, 2);
    m << 1.0, 0.0, 0.0, -1.0;
    return m;
}

}  // namespace pauli

}  // namespace qcorr
