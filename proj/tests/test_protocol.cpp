#include "qcorr/analysis.hpp"
#include "qcorr/protocol.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace qcorr;

namespace {

constexpr double kAperp = kTwoPi * 60.4e3;

NoiseModel ac_noise(double amp, double f_hz, NoiseKind kind = NoiseKind::ac) {
    NoiseModel m;
    m.kind = kind;
    m.amplitude = amp;
    m.frequency_hz = f_hz;
    m.phase_rad = 0.3;
    return m;
}

std::vector<double> delay_grid(double first, double step, std::size_t n) {
    std::vector<double> d(n);
    for (std::size_t k = 0; k < n; ++k) {
        d[k] = first + step * static_cast<double>(k);
    }
    return d;
}

}  // namespace

TEST(Sequences, QcStructure) {
    const auto seq = build_qc_sequence(1e-6, 3e-6);
    ASSERT_EQ(seq.steps.size(), 7u);
    EXPECT_TRUE(std::holds_alternative<step::Measure>(seq.steps.back()));
    EXPECT_TRUE(std::holds_alternative<step::PhaseRandomize>(seq.steps[2]));
    EXPECT_DOUBLE_EQ(std::get<step::Wait>(seq.steps[3]).duration, 2e-6);
    EXPECT_DOUBLE_EQ(seq.duration(), 4e-6);
    const auto w = seq.interrogation_windows();
    ASSERT_EQ(w.size(), 2u);
    EXPECT_DOUBLE_EQ(w[1].first - w[0].first, 3e-6);
}

TEST(Sequences, QcBoundaryDelayHasZeroWait) {
    const auto seq = build_qc_sequence(1e-6, 1e-6);
    EXPECT_EQ(std::get<step::Wait>(seq.steps[3]).duration, 0.0);
    EXPECT_NO_THROW(seq.validate());
    EXPECT_THROW(build_qc_sequence(1e-6, 0.9e-6), std::invalid_argument);
    EXPECT_THROW(build_qc_sequence(0.0, 1e-6), std::invalid_argument);
}

TEST(Sequences, CcStructure) {
    const auto seq = build_cc_sequence(1e-6, 2e-6);
    ASSERT_EQ(seq.steps.size(), 8u);
    const auto& r = std::get<step::Rotate>(seq.steps[2]);
    EXPECT_EQ(r.axis, Axis::x);
    EXPECT_DOUBLE_EQ(r.angle, kPi / 2);
    EXPECT_THROW(build_cc_sequence(1e-6, 0.5e-6), std::invalid_argument);
}

TEST(Sequences, ValidateRejectsMalformed) {
    ProtocolSequence seq;
    EXPECT_THROW(seq.validate(), std::invalid_argument);
    seq.steps = {step::Measure{}, step::Measure{}};
    EXPECT_THROW(seq.validate(), std::invalid_argument);
    seq.steps = {step::Measure{}, step::Initialize{}};
    EXPECT_THROW(seq.validate(), std::invalid_argument);
    seq.steps = {step::Initialize{}, step::Wait{-1.0}, step::Measure{}};
    EXPECT_THROW(seq.validate(), std::invalid_argument);
}

TEST(ExecuteExact, ClassicalOnlyQcIsZero) {
    // b_op = 0 with arbitrary classical fields
    const auto sys = build_bath(kTwoPi * 500e3, 0.0, 0.0, 0.7);
    const double t_i = 1e-6;
    const double dt = t_i / 64;
    for (auto kind : {NoiseKind::ac, NoiseKind::ou_lorentzian, NoiseKind::white}) {
        NoiseModel m = ac_noise(kTwoPi * 300e3, 500e3, kind);
        m.fwhm_hz = 4.5e3;
        m.center_hz = kind == NoiseKind::ou_lorentzian ? 500e3 : 0.0;
        for (double delay : {1e-6, 2.37e-6, 7.5e-6}) {
            const auto seq = build_qc_sequence(t_i, delay);
            const auto traj = sample_trajectory(m, seq.duration(), dt, 4);
            EXPECT_LE(std::abs(execute_exact(seq, sys, traj, dt).value), 1e-12) << to_string(kind);
        }
    }
}

TEST(ExecuteExact, UnpolarizedQcIsZero) {
    const auto sys = build_bath(kTwoPi * 500e3, 0.0, kAperp, 0.0);
    for (double delay : {1e-6, 1.3e-6, 4.1e-6}) {
        EXPECT_LE(std::abs(execute_exact(build_qc_sequence(1e-6, delay), sys, 1e-8).value), 1e-10);
    }
}

TEST(ExecuteExact, NoCouplingNoFieldCcIsZero) {
    const auto sys = build_bath(kTwoPi * 500e3, 0.0, 0.0, 0.5);
    EXPECT_LE(std::abs(execute_exact(build_cc_sequence(1e-6, 2e-6), sys, 1e-8).value), 1e-12);
}

TEST(ExecuteExact, QcAmplitudeMatchesShortTimeForm) {
    // 60.4 kHz coupling, t_I = 1 us, p_z = 0.5. The nuclear frequency is kept low
    // (omega t_I = 0.31) so that averaging over the window costs < 1% amplitude.
    const double omega = kTwoPi * 50e3;
    const double t_i = 1e-6;
    const auto sys = build_bath(omega, 0.0, kAperp, 0.5);
    const auto delays = delay_grid(t_i, 0.5e-6, 120);
    const auto trace = sweep_delay(build_qc_sequence, sys, NoiseModel{}, delays, t_i, {});
    const auto fit = fit_sinusoid(trace, omega / kTwoPi);
    const double expected = predict_qc_eq3(kAperp, t_i, 0.5, omega, kPi / (2 * omega));
    EXPECT_NEAR(expected, 0.0180, 0.0001);
    EXPECT_NEAR(fit.amplitude() / expected, 1.0, 0.05);
}

TEST(ExecuteExact, StateChecksPassOnRandomScenarios) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<NuclearSpinParams> spins(1 + trial % 2);
        for (auto& s : spins) {
            s = {kTwoPi * 80e3 * u(rng), kTwoPi * 200e3 * u(rng), 2 * u(rng) - 1};
        }
        const auto sys = build_bath(kTwoPi * (200e3 + 600e3 * u(rng)), spins);
        const double t_i = 0.2e-6 + 1e-6 * u(rng);
        const double delay = t_i * (1 + 5 * u(rng));
        const auto m = ac_noise(kTwoPi * 1e6 * u(rng), 500e3);
        for (const auto& seq : {build_qc_sequence(t_i, delay), build_cc_sequence(t_i, delay)}) {
            const auto traj = sample_trajectory(m, seq.duration(), t_i / 64, 0);
            double v = 0.0;
            EXPECT_NO_THROW(v = execute_exact(seq, sys, traj, t_i / 64, true).value);
            EXPECT_LE(std::abs(v), 1.0 + 1e-9);
        }
    }
}

TEST(ExecuteExact, NonPhysicalStateIsReported) {
    auto sys = build_bath(kTwoPi * 500e3, 0.0, kAperp, 0.5);
    sys.rho_bath = identity(2) / 2.0 + 1.5 * 0.5 * pauli::z();
    EXPECT_THROW(execute_exact(build_qc_sequence(1e-6, 2e-6), sys, 1e-8, true), NumericalError);
}

TEST(ExecuteExact, ShortTrajectoryIsRejected) {
    const auto sys = build_bath(kTwoPi * 500e3, 0.0, kAperp, 0.5);
    const auto seq = build_qc_sequence(1e-6, 5e-6);
    const auto traj = sample_trajectory(ac_noise(1e5, 1e5), 3e-6, 1e-8, 0);
    EXPECT_THROW(execute_exact(seq, sys, traj, 1e-8), std::out_of_range);
    EXPECT_THROW(execute_exact(seq, sys, 0.0), std::invalid_argument);
}

TEST(ExecuteExact, SecondOrderDiscrepancyShrinksSixteenfold) {
    const double omega = kTwoPi * 500e3;
    const auto sys = build_bath(omega, 0.0, kAperp, 0.5);
    auto discrepancy = [&](double t_i) {
        // a delay where the signal sits near its maximum
        const double delay = t_i + 0.6e-6;
        const double exact = execute_exact(build_qc_sequence(t_i, delay), sys, t_i / 256).value;
        return std::abs(exact - predict_qc_eq1(sys, t_i, 0.0, delay));
    };
    const double ratio = discrepancy(40e-9) / discrepancy(20e-9);
    EXPECT_GE(ratio, 8.0);
    EXPECT_LE(ratio, 32.0);
}

TEST(ExecuteExact, QuadratureOfQcAndCc) {
    // f = 125 kHz sits on bin 4 of a 128-point, 0.25 us grid
    const double omega = kTwoPi * 125e3;
    const double t_i = 20e-9;
    const auto sys = build_bath(omega, 0.0, kTwoPi * 200e3, 0.8);
    const auto delays = delay_grid(t_i, 0.25e-6, 128);
    for (bool qc : {true, false}) {
        const SequenceBuilder builder = qc ? SequenceBuilder(build_qc_sequence) : SequenceBuilder(build_cc_sequence);
        const auto trace = sweep_delay(builder, sys, NoiseModel{}, delays, t_i, {});
        const auto x = trace_dft(trace, Window::rect);
        // re-reference the phase to delay = 0
        const complex z = x[4] * std::exp(-kI * kTwoPi * 125e3 * delays.front());
        // sine shows up as -i N/2, cosine as +N/2
        if (qc) {
            EXPECT_LT(z.imag(), 0.0);
            EXPECT_LT(std::abs(z.real()), 0.1 * std::abs(z.imag()));
        } else {
            EXPECT_GT(z.real(), 0.0);
            EXPECT_LT(std::abs(z.imag()), 0.1 * std::abs(z.real()));
        }
    }
}

TEST(ExecuteMc, TwoPointPhaseAverageEqualsChannel) {
    const auto sys = build_bath(kTwoPi * 500e3, kTwoPi * 20e3, kAperp, 0.6);
    for (const auto& seq : {build_qc_sequence(0.3e-6, 1.1e-6), build_cc_sequence(0.3e-6, 1.1e-6)}) {
        const PreparedSequence prepared(seq, sys, 0.3e-6 / 64);
        const double channel = prepared.run(nullptr);
        const std::vector<double> zero{0.0};
        const std::vector<double> pi{kPi};
        const double avg = 0.5 * (prepared.run(nullptr, zero) + prepared.run(nullptr, pi));
        EXPECT_NEAR(avg, channel, 1e-12);
        // n_traj = 1, no noise, channel mode
        EXPECT_NEAR(execute_mc(seq, sys, NoiseModel{}, 1, 0.3e-6 / 64, RandomizeMode::exact_channel, 1).value,
                    channel, 1e-15);
    }
}

TEST(ExecuteMc, QcNullForRandomPhaseAc) {
    const auto sys = build_bath(kTwoPi * 500e3, 0.0, 0.0, 0.5);
    const auto m = ac_noise(kTwoPi * 400e3, 500e3, NoiseKind::random_phase_ac);
    const auto seq = build_qc_sequence(0.5e-6, 1.3e-6);
    const auto r = execute_mc(seq, sys, m, 2000, 0.5e-6 / 64, RandomizeMode::sampled, 5);
    EXPECT_GT(r.std_error, 0.0);
    EXPECT_LE(std::abs(r.value), 3 * r.std_error);
}

TEST(ExecuteMc, CcSeesRandomPhaseAcAt500kHz) {
    const auto sys = build_bath(kTwoPi * 500e3, 0.0, 0.0, 0.0);
    const auto m = ac_noise(kTwoPi * 400e3, 500e3, NoiseKind::random_phase_ac);
    const double t_i = 0.2e-6;
    // 0.25 us step: Nyquist 2 MHz, 500 kHz on bin 16 of 128
    const auto delays = delay_grid(t_i, 0.25e-6, 128);
    SweepSettings s;
    s.mode = ExecMode::monte_carlo;
    s.n_traj = 64;
    s.seed = 3;
    const auto trace = sweep_delay(build_cc_sequence, sys, m, delays, t_i, s);
    const auto spec = spectrum(trace, Window::rect);
    const auto peak = find_peak(spec, 10e3, 1.9e6);
    EXPECT_TRUE(peak.distinct);
    EXPECT_NEAR(peak.freq, 500e3, spec.resolution);
}

TEST(ExecuteMc, SampledModeConvergesToChannel) {
    const auto sys = build_bath(kTwoPi * 500e3, 0.0, kTwoPi * 150e3, 0.9);
    NoiseModel m;
    m.kind = NoiseKind::ou_lorentzian;
    m.amplitude = kTwoPi * 100e3;
    m.fwhm_hz = 50e3;
    for (const auto& seq : {build_qc_sequence(0.5e-6, 1.7e-6), build_cc_sequence(0.5e-6, 1.7e-6)}) {
        const double dt = 0.5e-6 / 64;
        const auto channel = execute_mc(seq, sys, m, 4000, dt, RandomizeMode::exact_channel, 8);
        const auto sampled = execute_mc(seq, sys, m, 4000, dt, RandomizeMode::sampled, 8);
        const double se = std::hypot(channel.std_error, sampled.std_error);
        EXPECT_LE(std::abs(channel.value - sampled.value), 3 * se);
    }
}

TEST(ExecuteMc, DeterministicAndWorkerIndependent) {
    const auto sys = build_bath(kTwoPi * 500e3, 0.0, kAperp, 0.5);
    const auto m = ac_noise(kTwoPi * 100e3, 480e3, NoiseKind::random_phase_ac);
    const auto seq = build_cc_sequence(0.5e-6, 1.5e-6);
    McOptions one;
    McOptions many;
    many.workers = 7;
    const auto a = execute_mc_samples(seq, sys, m, 300, 0.5e-6 / 64, RandomizeMode::sampled, 21, one);
    const auto b = execute_mc_samples(seq, sys, m, 300, 0.5e-6 / 64, RandomizeMode::sampled, 21, many);
    EXPECT_EQ(a, b);
    EXPECT_THROW(execute_mc(seq, sys, m, 0, 1e-8, RandomizeMode::sampled, 1), std::invalid_argument);
}

TEST(SweepDelay, LengthAndDuplicates) {
    const auto sys = build_bath(kTwoPi * 500e3, 0.0, kAperp, 0.5);
    const auto delays = delay_grid(0.1e-6, 0.05e-6, 128);
    const auto trace = sweep_delay(build_qc_sequence, sys, NoiseModel{}, delays, 0.1e-6, {});
    EXPECT_EQ(trace.size(), 128u);
    const std::vector<double> dup{0.3e-6, 0.3e-6};
    SweepSettings mc;
    mc.mode = ExecMode::monte_carlo;
    mc.n_traj = 3;
    for (const auto& s : {SweepSettings{}, mc}) {
        const auto t = sweep_delay(build_qc_sequence, sys, NoiseModel{}, dup, 0.1e-6, s);
        EXPECT_EQ(t.values[0], t.values[1]);
    }
    EXPECT_THROW(sweep_delay(build_qc_sequence, sys, NoiseModel{}, {}, 0.1e-6, {}), std::invalid_argument);
}

TEST(SweepDelay, FitFrequencyOfPolarizedSpin) {
    const double a_par = kTwoPi * 58.4e3;
    const auto sys = build_bath(kTwoPi * 539.5e3, a_par, kAperp, 0.5);
    const double f = sys.effective_frequency() / kTwoPi;
    const double t_i = 50e-9;
    const auto trace = sweep_delay(build_qc_sequence, sys, NoiseModel{}, delay_grid(t_i, 0.1e-6, 200), t_i, {});
    const auto fit = fit_sinusoid_frequency(trace, 0.9 * f, 1.1 * f);
    EXPECT_NEAR(fit.freq / f, 1.0, 0.01);
}

TEST(SweepDelay, WorkerCountDoesNotChangeResults) {
    const auto sys = build_bath(kTwoPi * 500e3, 0.0, kAperp, 0.5);
    NoiseModel m;
    m.kind = NoiseKind::ou_lorentzian;
    m.amplitude = kTwoPi * 50e3;
    m.fwhm_hz = 4.5e3;
    m.center_hz = 490e3;
    const auto delays = delay_grid(0.2e-6, 0.1e-6, 20);
    for (auto mode : {ExecMode::exact, ExecMode::monte_carlo}) {
        SweepSettings s;
        s.mode = mode;
        s.n_traj = 50;
        s.seed = 99;
        const auto a = sweep_delay(build_cc_sequence, sys, m, delays, 0.2e-6, s);
        s.workers = 4;
        const auto b = sweep_delay(build_cc_sequence, sys, m, delays, 0.2e-6, s);
        EXPECT_EQ(a.values, b.values);
        EXPECT_EQ(a.stderrs, b.stderrs);
    }
}

TEST(Defaults, SubstepRule) {
    const auto sys = build_bath(kTwoPi * 500e3, 0.0, kAperp, 0.5);
    EXPECT_DOUBLE_EQ(default_substep_dt(sys, NoiseModel{}, 10e-6), 1.0 / (50 * 500e3));
    EXPECT_DOUBLE_EQ(default_substep_dt(sys, NoiseModel{}, 50e-9), 50e-9 / 64);
    EXPECT_DOUBLE_EQ(default_substep_dt(sys, ac_noise(1.0, 2e6), 10e-6), 1.0 / (50 * 2e6));
}
