#include "qcorr/linalg.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace qcorr;

namespace {

ComplexMatrix random_matrix(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> g;
    ComplexMatrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            m(i, j) = {g(rng), g(rng)};
        }
    }
    return m;
}

ComplexMatrix random_hermitian(std::mt19937_64& rng, Eigen::Index n) {
    const ComplexMatrix a = random_matrix(rng, n);
    return 0.5 * (a + a.adjoint());
}

ComplexMatrix random_density(std::mt19937_64& rng, Eigen::Index n) {
    const ComplexMatrix a = random_matrix(rng, n);
    const ComplexMatrix rho = a * a.adjoint();
    return rho / rho.trace();
}

// Reference exponential by plain power series.
ComplexMatrix series_exp(const ComplexMatrix& a, int terms = 80) {
    ComplexMatrix term = identity(a.rows());
    ComplexMatrix sum = term;
    for (int k = 1; k < terms; ++k) {
        term = term * a / static_cast<double>(k);
        sum += term;
    }
    return sum;
}

}  // namespace

TEST(Kron, IdentityTimesIdentity) {
    EXPECT_EQ(max_abs(kron(identity(2), identity(2)) - identity(4)), 0.0);
}

TEST(Kron, LeftFactorIsSlowestIndex) {
    ComplexMatrix d(2, 2);
    d << 1.0, 0.0, 0.0, -1.0;
    ComplexMatrix expected = ComplexMatrix::Zero(4, 4);
    expected.diagonal() << 1.0, 1.0, -1.0, -1.0;
    EXPECT_EQ(max_abs(kron(d, identity(2)) - expected), 0.0);
}

TEST(Kron, PauliXTimesPauliZEntries) {
    const ComplexMatrix m = kron(pauli::x(), pauli::z());
    EXPECT_EQ(m(0, 2), complex(1.0));
    EXPECT_EQ(m(1, 3), complex(-1.0));
    // full brute-force expansion
    const ComplexMatrix x = pauli::x();
    const ComplexMatrix z = pauli::z();
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            EXPECT_EQ(m(i, j), x(i / 2, j / 2) * z(i % 2, j % 2));
        }
    }
}

TEST(Kron, Associative) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = random_matrix(rng, 2);
        const auto b = random_matrix(rng, 3);
        const auto c = random_matrix(rng, 2);
        EXPECT_LE(max_abs(kron(kron(a, b), c) - kron(a, kron(b, c))), 1e-14);
    }
}

TEST(ExpmHermitian, ZeroGivesIdentity) {
    EXPECT_LE(max_abs(expm_hermitian(zeros(3), 17.0) - identity(3)), 1e-15);
}

TEST(ExpmHermitian, DiagonalPauliZ) {
    const ComplexMatrix u = expm_hermitian(pauli::z(), -kPi / 2);
    EXPECT_LE(std::abs(u(0, 0) - std::exp(-kI * kPi / 2.0)), 1e-15);
    EXPECT_LE(std::abs(u(1, 1) - std::exp(kI * kPi / 2.0)), 1e-15);
    EXPECT_LE(std::abs(u(0, 1)), 1e-15);
}

TEST(ExpmHermitian, PauliXMatchesSeriesAndClosedForm) {
    for (double theta : {0.1, 0.7, 2.0, -1.3}) {
        const ComplexMatrix u = expm_hermitian(pauli::x(), theta);
        const ComplexMatrix closed = std::cos(theta) * identity(2) + kI * std::sin(theta) * pauli::x();
        EXPECT_LE(max_abs(u - series_exp(kI * theta * pauli::x())), 1e-12);
        EXPECT_LE(max_abs(u - closed), 1e-12);
    }
}

TEST(ExpmHermitian, RejectsNonHermitian) {
    ComplexMatrix m(2, 2);
    m << 0.0, 1.0, 0.0, 0.0;
    EXPECT_THROW(expm_hermitian(m, 1.0), std::invalid_argument);
}

TEST(ExpmHermitian, InverseAndUnitarityOnRandomInputs) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> s(-3.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        const auto h = random_hermitian(rng, 4);
        const double scale = s(rng);
        const auto u = expm_hermitian(h, scale);
        EXPECT_TRUE(is_unitary(u, tol::kIdentity));
        EXPECT_LE(max_abs(u * expm_hermitian(h, -scale) - identity(4)), tol::kIdentity);
        EXPECT_LE(max_abs(u - series_exp(kI * scale * h, 120)), 1e-10);
    }
}

TEST(PartialTrace, ProductStateFactorizes) {
    std::mt19937_64 rng(3);
    const auto a = random_density(rng, 2);
    const auto b = random_density(rng, 4);
    EXPECT_LE(max_abs(partial_trace_bath(kron(a, b), 2, 4) - a), 1e-14);
}

TEST(PartialTrace, MaximallyMixed) {
    EXPECT_LE(max_abs(partial_trace_bath(identity(4) / 4.0, 2, 2) - identity(2) / 2.0), 1e-15);
}

TEST(PartialTrace, PreservesTraceOfRandomStates) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto rho = random_density(rng, 8);
        EXPECT_LE(std::abs(partial_trace_bath(rho, 2, 4).trace() - rho.trace()), 1e-12);
    }
}

TEST(PartialTrace, KronGivesLeftTimesTrace) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = random_matrix(rng, 2);
        const auto y = random_matrix(rng, 4);
        EXPECT_LE(max_abs(partial_trace_bath(kron(x, y), 2, 4) - x * y.trace()), 1e-12);
    }
}

TEST(PartialTrace, DimensionMismatch) {
    EXPECT_THROW(partial_trace_bath(identity(6), 2, 2), DimensionError);
}

TEST(Commutator, PauliAlgebra) {
    EXPECT_LE(max_abs(commutator(pauli::x(), pauli::y()) - 2.0 * kI * pauli::z()), 1e-15);
    EXPECT_EQ(max_abs(anticommutator(pauli::x(), pauli::y())), 0.0);
    EXPECT_EQ(max_abs(commutator(pauli::y(), pauli::y())), 0.0);
}

TEST(Commutator, SymmetryProperties) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = random_matrix(rng, 3);
        const auto b = random_matrix(rng, 3);
        EXPECT_LE(max_abs(commutator(a, b) + commutator(b, a)), 1e-13);
        EXPECT_LE(max_abs(anticommutator(a, b) - anticommutator(b, a)), 1e-13);
    }
}

TEST(Commutator, DimensionMismatch) {
    EXPECT_THROW(commutator(identity(2), identity(3)), DimensionError);
    EXPECT_THROW(anticommutator(identity(2), identity(4)), DimensionError);
}

TEST(Predicates, DetectStructure) {
    EXPECT_TRUE(is_hermitian(pauli::y()));
    EXPECT_FALSE(is_hermitian(kI * pauli::y()));
    EXPECT_TRUE(is_unitary(pauli::y()));
    EXPECT_TRUE(is_psd(identity(2) / 2.0));
    EXPECT_TRUE(trace_one(identity(2) / 2.0));
    EXPECT_FALSE(is_psd(pauli::z()));
    EXPECT_FALSE(trace_one(identity(2)));
}
