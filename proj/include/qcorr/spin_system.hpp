#pragma once

// Sensor qubit and nuclear-spin bath operators.
//
// All rates are angular frequencies (rad/s). Nuclear spin operators are
// I_a = sigma_a / 2 (eigenvalues +-1/2). Bath spins do not interact with each
// other; spin k of N occupies factor k of the bath tensor product (spin 0 slowest).

#include "qcorr/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace qcorr {

// Gyromagnetic ratio of 13C over 2 pi.
inline constexpr double kGamma13CHzPerTesla = 10.705e6;
inline constexpr double kTeslaPerGauss = 1e-4;

// Larmor angular frequency for a static field given in gauss.
inline double larmor_from_field(double b_z_gauss, double gamma_hz_per_t = kGamma13CHzPerTesla) {
    return kTwoPi * gamma_hz_per_t * b_z_gauss * kTeslaPerGauss;
}

struct NuclearSpinParams {
    double a_par = 0.0;   // rad/s
    double a_perp = 0.0;  // rad/s
    double p_z = 0.0;     // polarization, |p_z| <= 1
};

struct SensorOps {
    ComplexMatrix s_z;
    ComplexMatrix pauli_x;
    ComplexMatrix pauli_y;
    ComplexMatrix pauli_z;
    ComplexMatrix plus_x_state;

    static SensorOps make() {
        SensorOps ops;
        ops.pauli_x = pauli::x();
        ops.pauli_y = pauli::y();
        ops.pauli_z = pauli::z();
        ops.s_z = 0.5 * ops.pauli_z;
        ops.plus_x_state = 0.5 * (identity(2) + ops.pauli_x);
        return ops;
    }
};

struct SpinSystem {
    Eigen::Index dim_sensor = 2;
    Eigen::Index dim_bath = 2;
    double omega0 = 0.0;  // bare nuclear Larmor frequency, rad/s
    std::vector<NuclearSpinParams> spins;
    ComplexMatrix h_bath;    // rad/s
    ComplexMatrix b_op;      // rad/s
    ComplexMatrix rho_bath;  // trace one

    std::size_t n_spins() const { return spins.size(); }

    // omega0 + A_par/2 of spin k: the precession frequency seen in correlation signals.
    double effective_frequency(std::size_t k = 0) const { return omega0 + spins.at(k).a_par / 2.0; }
};

namespace detail {

// Single-spin operator embedded at position `site` of an n-spin register.
inline ComplexMatrix embed(const ComplexMatrix& op, std::size_t site, std::size_t n) {
    ComplexMatrix out = identity(1);
    for (std::size_t k = 0; k < n; ++k) {
        out = kron(out, k == site ? op : identity(2));
    }
    return out;
}

}  // namespace detail

inline SpinSystem build_bath(double omega0, const std::vector<NuclearSpinParams>& spins) {
    if (spins.empty()) {
        throw std::invalid_argument("build_bath: need at least one nuclear spin");
    }
    if (!std::isfinite(omega0)) {
        throw std::invalid_argument("build_bath: omega0 must be finite");
    }
    for (const auto& s : spins) {
        if (!std::isfinite(s.a_par) || !std::isfinite(s.a_perp) || !std::isfinite(s.p_z)) {
            throw std::invalid_argument("build_bath: hyperfine parameters must be finite");
        }
        if (std::abs(s.p_z) > 1.0) {
            throw std::invalid_argument("build_bath: invalid polarization |p_z| > 1");
        }
    }

    const std::size_t n = spins.size();
    const ComplexMatrix i_x = 0.5 * pauli::x();
    const ComplexMatrix i_z = 0.5 * pauli::z();

    SpinSystem sys;
    sys.omega0 = omega0;
    sys.spins = spins;
    sys.dim_bath = Eigen::Index{1} << n;
    sys.h_bath = zeros(sys.dim_bath);
    sys.b_op = zeros(sys.dim_bath);
    sys.rho_bath = identity(1);
    for (std::size_t k = 0; k < n; ++k) {
        const double omega = omega0 + spins[k].a_par / 2.0;
        sys.h_bath += omega * detail::embed(i_z, k, n);
        sys.b_op += spins[k].a_perp * detail::embed(i_x, k, n);
        sys.rho_bath = kron(sys.rho_bath, 0.5 * identity(2) + spins[k].p_z * i_z);
    }
    return sys;
}

inline SpinSystem build_bath(double omega0, double a_par, double a_perp, double p_z,
                             std::size_t n_spins = 1) {
    return build_bath(omega0, std::vector<NuclearSpinParams>(n_spins, {a_par, a_perp, p_z}));
}

// B(t) = exp(i H_B t) B exp(-i H_B t).
inline ComplexMatrix heisenberg_b(const SpinSystem& sys, double t) {
    const ComplexMatrix u = expm_hermitian(sys.h_bath, t);
    return u * sys.b_op * u.adjoint();
}

// Operator-valued phase t_I * B(t_center) picked up during one interrogation window.
inline ComplexMatrix phase_operator(const SpinSystem& sys, double t_interr, double t_center) {
    if (!(t_interr >= 0.0)) {
        throw std::invalid_argument("phase_operator: t_interr must be >= 0");
    }
    return t_interr * heisenberg_b(sys, t_center);
}

}  // namespace qcorr
