#pragma once

// Brute-force reference evolution used to validate PreparedSequence.
//
// Nothing here reuses the executor's propagators: operators are assembled with
// local loops, every substep propagator is a scaled-and-squared Taylor series,
// b(t) is re-interpolated from the raw samples and phase randomization is an
// explicit average over equally spaced z rotations. Single threaded.

#include "qcorr/linalg.hpp"
#include "qcorr/noise.hpp"
#include "qcorr/protocol.hpp"
#include "qcorr/spin_system.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace qcorr::oracle {

namespace detail {

inline ComplexMatrix tensor(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out = ComplexMatrix::Zero(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            for (Eigen::Index k = 0; k < b.rows(); ++k) {
                for (Eigen::Index l = 0; l < b.cols(); ++l) {
                    out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
                }
            }
        }
    }
    return out;
}

// exp(-i h dt): Taylor series on a matrix scaled below norm 1/2, then squared back.
inline ComplexMatrix taylor_propagator(const ComplexMatrix& h, double dt) {
    const ComplexMatrix a = complex(0.0, -dt) * h;
    const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.5) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    }
    const ComplexMatrix scaled = a / std::ldexp(1.0, squarings);
    ComplexMatrix term = ComplexMatrix::Identity(h.rows(), h.cols());
    ComplexMatrix sum = term;
    for (int k = 1; k < 60; ++k) {
        term = term * scaled / static_cast<double>(k);
        sum += term;
        if (term.cwiseAbs().maxCoeff() < 1e-20) {
            break;
        }
    }
    for (int s = 0; s < squarings; ++s) {
        sum = sum * sum;
    }
    return sum;
}

inline ComplexMatrix sensor_rotation(Axis axis, double angle) {
    const ComplexMatrix sigma = pauli_matrix(axis);
    return std::cos(angle / 2.0) * ComplexMatrix::Identity(2, 2) - kI * std::sin(angle / 2.0) * sigma;
}

inline double field_at(const NoiseTrajectory* traj, double t) {
    if (traj == nullptr) {
        return 0.0;
    }
    for (const auto& seg : traj->segments) {
        const double span = traj->dt * static_cast<double>(seg.samples.size() - 1);
        const double slack = 1e-9 * traj->dt;
        if (t < seg.t0 - slack || t > seg.t0 + span + slack) {
            continue;
        }
        if (seg.samples.size() == 1) {
            return seg.samples.front();
        }
        double pos = (t - seg.t0) / traj->dt;
        pos = std::min(std::max(pos, 0.0), static_cast<double>(seg.samples.size() - 1));
        std::size_t left = static_cast<std::size_t>(pos);
        if (left + 1 >= seg.samples.size()) {
            left = seg.samples.size() - 2;
        }
        const double w = pos - static_cast<double>(left);
        return (1.0 - w) * seg.samples[left] + w * seg.samples[left + 1];
    }
    throw std::out_of_range("oracle: noise trajectory does not cover t=" + std::to_string(t));
}

}  // namespace detail

// Expectation of the measured Pauli operator, evolved with n_substeps
// piecewise-constant substeps per Interrogate and Wait step and phase
// randomization averaged over n_phases angles 2 pi k / n_phases.
inline double oracle_execute(const ProtocolSequence& seq, const SpinSystem& sys, const NoiseTrajectory* traj,
                             int n_substeps = 256, int n_phases = 16) {
    if (n_substeps < 1 || n_phases < 2) {
        throw std::invalid_argument("oracle: need n_substeps >= 1 and n_phases >= 2");
    }
    seq.validate();
    const Eigen::Index db = sys.dim_bath;
    const ComplexMatrix id2 = ComplexMatrix::Identity(2, 2);
    const ComplexMatrix idb = ComplexMatrix::Identity(db, db);
    const ComplexMatrix sz(0.5 * pauli_matrix(Axis::z));
    const ComplexMatrix h_free = detail::tensor(id2, sys.h_bath);
    const ComplexMatrix h_quantum = h_free + detail::tensor(sz, sys.b_op);
    const ComplexMatrix sz_full = detail::tensor(sz, idb);

    ComplexMatrix rho;
    double t = 0.0;
    for (const auto& s : seq.steps) {
        if (const auto* init = std::get_if<step::Initialize>(&s)) {
            const ComplexMatrix pure = 0.5 * (id2 + static_cast<double>(init->sign) * pauli_matrix(init->axis));
            rho = detail::tensor(pure, sys.rho_bath);
        } else if (const auto* in = std::get_if<step::Interrogate>(&s)) {
            const double h = in->duration / n_substeps;
            for (int k = 0; k < n_substeps; ++k) {
                const double b = detail::field_at(traj, t + (k + 0.5) * h);
                const ComplexMatrix u = detail::taylor_propagator(h_quantum + b * sz_full, h);
                rho = u * rho * u.adjoint();
            }
            t += in->duration;
        } else if (const auto* w = std::get_if<step::Wait>(&s)) {
            const double h = w->duration / n_substeps;
            const ComplexMatrix u = detail::taylor_propagator(h_free, h);
            for (int k = 0; k < n_substeps; ++k) {
                rho = u * rho * u.adjoint();
            }
            t += w->duration;
        } else if (const auto* r = std::get_if<step::Rotate>(&s)) {
            const ComplexMatrix u = detail::tensor(detail::sensor_rotation(r->axis, r->angle), idb);
            rho = u * rho * u.adjoint();
        } else if (std::holds_alternative<step::PhaseRandomize>(s)) {
            ComplexMatrix avg = ComplexMatrix::Zero(rho.rows(), rho.cols());
            for (int k = 0; k < n_phases; ++k) {
                const ComplexMatrix u =
                    detail::tensor(detail::sensor_rotation(Axis::z, kTwoPi * k / n_phases), idb);
                avg += u * rho * u.adjoint();
            }
            rho = avg / static_cast<double>(n_phases);
        } else if (const auto* m = std::get_if<step::Measure>(&s)) {
            return (detail::tensor(pauli_matrix(m->axis), idb) * rho).trace().real();
        }
    }
    throw std::logic_error("oracle: sequence without Measure");
}

struct CalibrationPoint {
    double a_perp = 0.0;    // rad/s
    double t_interr = 0.0;  // s
    double p_z = 0.0;
    double omega = 0.0;  // rad/s
};

struct Calibration {
    double constant = 0.0;
    std::vector<double> per_point;  // least-squares ratio of each family member
};

// Least-squares ratio of the exact QC signal to (A_perp t_I)^2/4 p_z sin(omega delay)
// over a family of single-spin systems. Throws if the ratio varies by more than 2%.
inline Calibration calibrate_eq3_constant(const std::vector<CalibrationPoint>& family, int n_substeps = 256) {
    if (family.empty()) {
        throw std::invalid_argument("calibrate: empty family");
    }
    Calibration cal;
    double num_all = 0.0;
    double den_all = 0.0;
    for (const auto& p : family) {
        if (std::abs(p.a_perp * p.t_interr) > 0.05 || p.p_z == 0.0) {
            throw std::invalid_argument("calibrate: need |a_perp t_interr| <= 0.05 and p_z != 0");
        }
        const SpinSystem sys = build_bath(p.omega, 0.0, p.a_perp, p.p_z);
        const double period = kTwoPi / p.omega;
        double num = 0.0;
        double den = 0.0;
        for (int k = 0; k < 8; ++k) {
            const double delay = p.t_interr + (0.125 + 0.25 * k) * period;
            const double exact = oracle_execute(build_qc_sequence(p.t_interr, delay), sys, nullptr, n_substeps, 2);
            const double shape = (p.a_perp * p.a_perp * p.t_interr * p.t_interr / 4.0) * p.p_z *
                                 std::sin(p.omega * delay);
            num += exact * shape;
            den += shape * shape;
        }
        cal.per_point.push_back(num / den);
        num_all += num;
        den_all += den;
    }
    cal.constant = num_all / den_all;
    for (double r : cal.per_point) {
        if (std::abs(r / cal.constant - 1.0) > 0.02) {
            throw std::runtime_error("calibrate: ratio " + std::to_string(r) + " departs from " +
                                     std::to_string(cal.constant) + " by more than 2%");
        }
    }
    return cal;
}

}  // namespace qcorr::oracle
