#pragma once

// QC and CC correlation protocols on the joint sensor (x) bath state.
//
// Timeline: the first interrogation window starts at t = 0. `delay` is the
// start-to-start separation of the two windows, so the wait between them is
// delay - t_interr. During interrogation
//     H(t) = 1 (x) H_B + S_z (x) B + b(t) S_z (x) 1,
// elsewhere the sensor is decoupled and only 1 (x) H_B acts.

#include "qcorr/linalg.hpp"
#include "qcorr/noise.hpp"
#include "qcorr/parallel.hpp"
#include "qcorr/spin_system.hpp"
#include "qcorr/trace.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace qcorr {

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Axis { x, y, z };
enum class RandomizeMode { exact_channel, sampled };
enum class ExecMode { exact, monte_carlo };

inline std::string_view to_string(RandomizeMode m) {
    return m == RandomizeMode::exact_channel ? "exact_channel" : "sampled";
}

inline std::string_view to_string(ExecMode m) { return m == ExecMode::exact ? "exact" : "monte_carlo"; }

inline ComplexMatrix pauli_matrix(Axis axis) {
    switch (axis) {
        case Axis::x: return pauli::x();
        case Axis::y: return pauli::y();
        case Axis::z: return pauli::z();
    }
    throw std::invalid_argument("unknown axis");
}

namespace step {
struct Initialize {
    Axis axis = Axis::x;
    int sign = +1;
};
struct Interrogate {
    double duration = 0.0;
};
struct Rotate {
    Axis axis = Axis::x;
    double angle = 0.0;
};
struct PhaseRandomize {
    RandomizeMode mode = RandomizeMode::exact_channel;
};
struct Wait {
    double duration = 0.0;
};
struct Measure {
    Axis axis = Axis::y;
};
}  // namespace step

using ProtocolStep = std::variant<step::Initialize, step::Interrogate, step::Rotate, step::PhaseRandomize,
                                  step::Wait, step::Measure>;

struct ProtocolSequence {
    std::vector<ProtocolStep> steps;
    double t_interr = 0.0;
    double delay = 0.0;

    void validate() const {
        if (steps.empty() || !std::holds_alternative<step::Measure>(steps.back())) {
            throw std::invalid_argument("protocol: the last step must be Measure");
        }
        std::size_t measures = 0;
        for (const auto& s : steps) {
            if (std::holds_alternative<step::Measure>(s)) {
                ++measures;
            }
            if (const auto* i = std::get_if<step::Interrogate>(&s); i && !(i->duration >= 0.0)) {
                throw std::invalid_argument("protocol: negative interrogation time");
            }
            if (const auto* w = std::get_if<step::Wait>(&s); w && !(w->duration >= 0.0)) {
                throw std::invalid_argument("protocol: negative wait");
            }
        }
        if (measures != 1) {
            throw std::invalid_argument("protocol: exactly one Measure step is allowed");
        }
    }

    // Total elapsed time; pulses are instantaneous.
    double duration() const {
        double t = 0.0;
        for (const auto& s : steps) {
            if (const auto* i = std::get_if<step::Interrogate>(&s)) {
                t += i->duration;
            } else if (const auto* w = std::get_if<step::Wait>(&s)) {
                t += w->duration;
            }
        }
        return t;
    }

    // [start, end] of every interrogation window in timeline order.
    std::vector<std::pair<double, double>> interrogation_windows() const {
        std::vector<std::pair<double, double>> out;
        double t = 0.0;
        for (const auto& s : steps) {
            if (const auto* i = std::get_if<step::Interrogate>(&s)) {
                out.emplace_back(t, t + i->duration);
                t += i->duration;
            } else if (const auto* w = std::get_if<step::Wait>(&s)) {
                t += w->duration;
            }
        }
        return out;
    }
};

namespace detail {
inline void check_timing(double t_interr, double delay) {
    if (!(t_interr > 0.0) || !std::isfinite(t_interr)) {
        throw std::invalid_argument("protocol: t_interr must be positive");
    }
    if (!(delay >= t_interr)) {
        throw std::invalid_argument("protocol: delay must be >= t_interr");
    }
}
}  // namespace detail

inline ProtocolSequence build_qc_sequence(double t_interr, double delay) {
    detail::check_timing(t_interr, delay);
    ProtocolSequence seq;
    seq.t_interr = t_interr;
    seq.delay = delay;
    seq.steps = {step::Initialize{Axis::x, +1},
                 step::Interrogate{t_interr},
                 step::PhaseRandomize{},
                 step::Wait{delay - t_interr},
                 step::Rotate{Axis::y, kPi / 2},
                 step::Interrogate{t_interr},
                 step::Measure{Axis::y}};
    return seq;
}

// Same as QC with an x pi/2 pulse before randomization: it moves the phase of
// the first window into the sensor population, where it survives.
inline ProtocolSequence build_cc_sequence(double t_interr, double delay) {
    detail::check_timing(t_interr, delay);
    ProtocolSequence seq;
    seq.t_interr = t_interr;
    seq.delay = delay;
    seq.steps = {step::Initialize{Axis::x, +1},
                 step::Interrogate{t_interr},
                 step::Rotate{Axis::x, kPi / 2},
                 step::PhaseRandomize{},
                 step::Wait{delay - t_interr},
                 step::Rotate{Axis::y, kPi / 2},
                 step::Interrogate{t_interr},
                 step::Measure{Axis::y}};
    return seq;
}

using SequenceBuilder = std::function<ProtocolSequence(double t_interr, double delay)>;

struct ExecutionResult {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_traj = 0;
    ExecMode mode = ExecMode::exact;
};

// min(t_interr/64, 1/(50 f_max)), f_max being the fastest frequency in the
// bath Hamiltonian, the coupling, or the classical field.
inline double default_substep_dt(const SpinSystem& sys, const NoiseModel& noise, double t_interr) {
    double f_max = 0.0;
    for (std::size_t k = 0; k < sys.n_spins(); ++k) {
        f_max = std::max({f_max, std::abs(sys.effective_frequency(k)) / kTwoPi,
                          std::abs(sys.spins[k].a_perp) / kTwoPi});
    }
    switch (noise.kind) {
        case NoiseKind::ac:
        case NoiseKind::random_phase_ac: f_max = std::max(f_max, noise.frequency_hz); break;
        case NoiseKind::ou_lorentzian: f_max = std::max(f_max, noise.center_hz + noise.fwhm_hz); break;
        default: break;
    }
    double dt = t_interr / 64.0;
    if (f_max > 0.0) {
        dt = std::min(dt, 1.0 / (50.0 * f_max));
    }
    return dt;
}

// A sequence bound to a spin system with every step's propagator precomputed.
// run() is const and may be called concurrently.
//
// The classical term b(t) S_z (x) 1 commutes with the rest of the interrogation
// Hamiltonian, so the product of the piecewise-constant substep propagators
// factorizes exactly into exp(-i H_0 t_I) and a sensor phase exp(-i Phi S_z),
// Phi being the midpoint-rule integral of b over the window's substeps.
class PreparedSequence {
public:
    PreparedSequence(const ProtocolSequence& seq, const SpinSystem& sys, double substep_dt)
        : seq_(seq), dim_bath_(sys.dim_bath), substep_dt_(substep_dt) {
        seq_.validate();
        if (!(substep_dt > 0.0)) {
            throw std::invalid_argument("protocol: substep_dt must be positive");
        }
        const ComplexMatrix id_b = identity(dim_bath_);
        const ComplexMatrix h_wait = kron(identity(2), sys.h_bath);
        const ComplexMatrix h_couple = h_wait + kron(0.5 * pauli::z(), sys.b_op);
        rho_bath_ = sys.rho_bath;
        ops_.reserve(seq_.steps.size());
        for (const auto& s : seq_.steps) {
            ComplexMatrix op;
            if (const auto* init = std::get_if<step::Initialize>(&s)) {
                op = 0.5 * (identity(2) + static_cast<double>(init->sign) * pauli_matrix(init->axis));
            } else if (const auto* in = std::get_if<step::Interrogate>(&s)) {
                op = expm_hermitian(h_couple, -in->duration);
            } else if (const auto* w = std::get_if<step::Wait>(&s)) {
                op = expm_hermitian(h_wait, -w->duration);
            } else if (const auto* r = std::get_if<step::Rotate>(&s)) {
                op = kron(expm_hermitian(pauli_matrix(r->axis), -r->angle / 2.0), id_b);
            } else if (const auto* m = std::get_if<step::Measure>(&s)) {
                op = kron(pauli_matrix(m->axis), id_b);
            }
            ops_.push_back(std::move(op));
        }
    }

    const ProtocolSequence& sequence() const { return seq_; }

    std::size_t n_randomizations() const {
        std::size_t n = 0;
        for (const auto& s : seq_.steps) {
            n += std::holds_alternative<step::PhaseRandomize>(s) ? 1 : 0;
        }
        return n;
    }

    // Executes once. `traj` may be null (no classical field). If `sampled_phases`
    // is non-empty, each PhaseRandomize step applies Rotate(z, theta_k) with the
    // next angle instead of the dephasing channel.
    double run(const NoiseTrajectory* traj, std::span<const double> sampled_phases = {},
               bool check_state = false) const {
        if (!sampled_phases.empty() && sampled_phases.size() != n_randomizations()) {
            throw std::invalid_argument("protocol: need one sampled phase per PhaseRandomize step");
        }
        const Eigen::Index db = dim_bath_;
        ComplexMatrix rho;
        double t = 0.0;
        std::size_t phase_index = 0;
        for (std::size_t k = 0; k < seq_.steps.size(); ++k) {
            const auto& s = seq_.steps[k];
            const ComplexMatrix& op = ops_[k];
            if (std::holds_alternative<step::Initialize>(s)) {
                rho = kron(op, rho_bath_);
            } else if (const auto* in = std::get_if<step::Interrogate>(&s)) {
                rho = op * rho * op.adjoint();
                if (traj != nullptr && in->duration > 0.0) {
                    const double t_end = t + in->duration;
                    if (!traj->covers(t, t_end)) {
                        throw std::out_of_range("protocol: noise trajectory shorter than the sequence");
                    }
                    const auto n_sub =
                        static_cast<std::size_t>(std::max(1.0, std::ceil(in->duration / substep_dt_ - 1e-9)));
                    apply_sensor_phase(rho, traj->integrate(t, t_end, n_sub), db);
                }
                t += in->duration;
            } else if (const auto* w = std::get_if<step::Wait>(&s)) {
                rho = op * rho * op.adjoint();
                t += w->duration;
            } else if (std::holds_alternative<step::Rotate>(s)) {
                rho = op * rho * op.adjoint();
            } else if (std::holds_alternative<step::PhaseRandomize>(s)) {
                if (sampled_phases.empty()) {
                    rho.block(0, db, db, db).setZero();
                    rho.block(db, 0, db, db).setZero();
                } else {
                    apply_sensor_phase(rho, sampled_phases[phase_index++], db);
                }
            } else if (std::holds_alternative<step::Measure>(s)) {
                const complex v = (op * rho).trace();
                if (std::abs(v.imag()) > 1e-9) {
                    throw NumericalError("protocol: measured expectation has imaginary part " +
                                         std::to_string(v.imag()));
                }
                return v.real();
            }
            if (check_state) {
                check(rho, k);
            }
        }
        throw std::logic_error("protocol: sequence without Measure");
    }

private:
    // exp(-i phi S_z) on the sensor: the (0,1) block picks up e^{-i phi}.
    static void apply_sensor_phase(ComplexMatrix& rho, double phi, Eigen::Index db) {
        const complex ph = std::exp(-kI * phi);
        rho.block(0, db, db, db) *= ph;
        rho.block(db, 0, db, db) *= std::conj(ph);
    }

    static void check(const ComplexMatrix& rho, std::size_t step_index) {
        const double tr_err = std::abs(rho.trace() - complex(1.0, 0.0));
        if (tr_err > tol::kStructural) {
            throw NumericalError("protocol: trace drift " + std::to_string(tr_err) + " after step " +
                                 std::to_string(step_index));
        }
        const double lo = min_eigenvalue(0.5 * (rho + rho.adjoint()));
        if (lo < -tol::kNegativeEigenvalue) {
            throw NumericalError("protocol: density matrix not PSD (min eigenvalue " + std::to_string(lo) +
                                 ") after step " + std::to_string(step_index));
        }
    }

    ProtocolSequence seq_;
    Eigen::Index dim_bath_;
    double substep_dt_;
    ComplexMatrix rho_bath_;
    std::vector<ComplexMatrix> ops_;
};

inline ExecutionResult execute_exact(const ProtocolSequence& seq, const SpinSystem& sys,
                                     const NoiseTrajectory& traj, double substep_dt, bool check_state = true) {
    const PreparedSequence prepared(seq, sys, substep_dt);
    return {prepared.run(&traj, {}, check_state), 0.0, 1, ExecMode::exact};
}

// No classical field.
inline ExecutionResult execute_exact(const ProtocolSequence& seq, const SpinSystem& sys, double substep_dt,
                                     bool check_state = true) {
    const PreparedSequence prepared(seq, sys, substep_dt);
    return {prepared.run(nullptr, {}, check_state), 0.0, 1, ExecMode::exact};
}

struct McOptions {
    std::size_t workers = 1;
    bool check_state = false;
    double noise_dt = 0.0;  // grid of sampled trajectories; 0 means substep_dt
};

// Per-trajectory values of the Monte Carlo estimate, in trajectory order.
// Trajectory j uses noise key (seed, j); sampled phases come from stream 1 of
// the same key.
inline std::vector<double> execute_mc_samples(const ProtocolSequence& seq, const SpinSystem& sys,
                                              const NoiseModel& model, std::size_t n_traj, double substep_dt,
                                              RandomizeMode randomize_mode, std::uint64_t seed,
                                              const McOptions& options = {}) {
    if (n_traj < 1) {
        throw std::invalid_argument("protocol: n_traj must be >= 1");
    }
    const PreparedSequence prepared(seq, sys, substep_dt);
    NoiseModel keyed = model;
    keyed.seed_base = seed;
    keyed.validate();
    const double noise_dt = options.noise_dt > 0.0 ? options.noise_dt : substep_dt;
    const auto windows = seq.interrogation_windows();
    const std::size_t n_phase = prepared.n_randomizations();
    const bool has_noise = keyed.kind != NoiseKind::none;
    return parallel_map(n_traj, options.workers, [&](std::size_t j) {
        std::vector<double> phases;
        if (randomize_mode == RandomizeMode::sampled) {
            auto rng = make_rng(seed, j, 1);
            std::uniform_real_distribution<double> uniform(0.0, kTwoPi);
            phases.resize(n_phase);
            for (auto& p : phases) {
                p = uniform(rng);
            }
        }
        if (has_noise) {
            const NoiseTrajectory traj = sample_windows(keyed, windows, noise_dt, j);
            return prepared.run(&traj, phases, options.check_state);
        }
        return prepared.run(nullptr, phases, options.check_state);
    });
}

inline ExecutionResult execute_mc(const ProtocolSequence& seq, const SpinSystem& sys, const NoiseModel& model,
                                  std::size_t n_traj, double substep_dt, RandomizeMode randomize_mode,
                                  std::uint64_t seed, const McOptions& options = {}) {
    const auto samples = execute_mc_samples(seq, sys, model, n_traj, substep_dt, randomize_mode, seed, options);
    const auto stats = mean_and_stderr(samples);
    return {stats.mean, stats.stderr_of_mean, n_traj, ExecMode::monte_carlo};
}

// SplitMix64 finalizer; derives independent keys for the delays of a sweep.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct SweepSettings {
    ExecMode mode = ExecMode::exact;
    std::size_t n_traj = 1;
    double substep_dt = 0.0;  // 0 means default_substep_dt()
    RandomizeMode randomize_mode = RandomizeMode::exact_channel;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    bool check_state = false;
};

// Exact mode evaluates every delay against one fixed realization of the
// classical field (key (seed, 0)). Monte Carlo mode draws an independent
// trajectory set per delay, keyed by mix_seed(seed, delay index).
inline CorrelationTrace sweep_delay(const SequenceBuilder& builder, const SpinSystem& sys,
                                    const NoiseModel& model, std::span<const double> delays, double t_interr,
                                    const SweepSettings& settings) {
    if (delays.empty()) {
        throw std::invalid_argument("sweep: no delays");
    }
    if (settings.substep_dt < 0.0 || std::isnan(settings.substep_dt)) {
        throw std::invalid_argument("sweep: substep_dt must be positive");
    }
    const double substep =
        settings.substep_dt > 0.0 ? settings.substep_dt : default_substep_dt(sys, model, t_interr);
    CorrelationTrace trace;
    trace.delays.assign(delays.begin(), delays.end());
    trace.values.resize(delays.size());
    trace.stderrs.resize(delays.size());
    if (settings.mode == ExecMode::exact) {
        NoiseModel keyed = model;
        keyed.seed_base = settings.seed;
        trace.values = parallel_map(delays.size(), settings.workers, [&](std::size_t i) {
            const ProtocolSequence seq = builder(t_interr, delays[i]);
            const PreparedSequence prepared(seq, sys, substep);
            if (keyed.kind == NoiseKind::none) {
                return prepared.run(nullptr, {}, settings.check_state);
            }
            const NoiseTrajectory traj = sample_windows(keyed, seq.interrogation_windows(), substep, 0);
            return prepared.run(&traj, {}, settings.check_state);
        });
        return trace;
    }
    McOptions options;
    options.workers = settings.workers;
    options.check_state = settings.check_state;
    for (std::size_t i = 0; i < delays.size(); ++i) {
        const ProtocolSequence seq = builder(t_interr, delays[i]);
        const auto r = execute_mc(seq, sys, model, settings.n_traj, substep, settings.randomize_mode,
                                  mix_seed(settings.seed, i), options);
        trace.values[i] = r.value;
        trace.stderrs[i] = r.std_error;
    }
    return trace;
}

}  // namespace qcorr
