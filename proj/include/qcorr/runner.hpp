#pragma once

// Scenario execution behind the command-line front end: sweeps, spectra,
// the oracle validation suite and the noise PSD check.

#include "qcorr/analysis.hpp"
#include "qcorr/io.hpp"
#include "qcorr/noise.hpp"
#include "qcorr/oracle.hpp"
#include "qcorr/protocol.hpp"
#include "qcorr/scenario.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#ifndef QCORR_VERSION
#define QCORR_VERSION "0.1.0"
#endif

namespace qcorr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitNumerical = 3;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunOptions {
    std::optional<std::filesystem::path> out_dir;  // overrides output.path
    std::size_t workers = 1;
    std::optional<std::uint64_t> seed;  // overrides run.seed
};

struct RunResult {
    CorrelationTrace trace;
    std::optional<Spectrum> spectrum;
    double substep_dt = 0.0;
    std::uint64_t seed = 0;
};

inline RunResult run_scenario(ScenarioConfig cfg, std::size_t workers = 1) {
    RunResult result;
    const SpinSystem sys = make_spin_system(cfg);
    const NoiseModel noise = make_noise_model(cfg);
    const auto delays = make_delays(cfg);
    const double t_interr = cfg.protocol.t_interr_s;

    SweepSettings settings;
    settings.mode = cfg.run.mode;
    settings.n_traj = cfg.run.n_traj;
    settings.substep_dt = cfg.run.substep_dt_s.value_or(default_substep_dt(sys, noise, t_interr));
    settings.randomize_mode = cfg.protocol.randomize_mode;
    settings.seed = cfg.run.seed;
    settings.workers = workers;

    result.substep_dt = settings.substep_dt;
    result.seed = settings.seed;
    result.trace = sweep_delay(make_builder(cfg), sys, noise, delays, t_interr, settings);
    result.trace.meta = std::string(to_string(cfg.protocol.kind)) + "/" + std::string(to_string(cfg.noise.kind));
    if (cfg.output.emit_spectrum && delays.size() >= 2) {
        result.spectrum = spectrum(result.trace, cfg.output.spectrum_window);
    }
    return result;
}

namespace detail {

inline std::ofstream open_for_write(const std::filesystem::path& p) {
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw IoError("cannot open '" + p.string() + "' for writing");
    }
    return os;
}

inline void finish(std::ofstream& os, const std::filesystem::path& p) {
    os.flush();
    if (!os) {
        throw IoError("write to '" + p.string() + "' failed");
    }
}

inline void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
    }
}

}  // namespace detail

// Runs the sweep and writes trace.csv (or trace.json), spectrum.csv and
// manifest.json into the output directory. Returns a process exit code.
inline int run_command(ScenarioConfig cfg, const RunOptions& options, std::ostream& log = std::cerr) {
    const auto t_start = std::chrono::steady_clock::now();
    if (options.seed) {
        cfg.run.seed = *options.seed;
    }
    const std::filesystem::path out_dir = options.out_dir.value_or(std::filesystem::path(cfg.output.path));
    try {
        RunResult result = run_scenario(cfg, options.workers);
        detail::ensure_dir(out_dir);

        std::vector<std::string> outputs;
        if (cfg.output.format == "json") {
            const auto p = out_dir / "trace.json";
            auto os = detail::open_for_write(p);
            os << trace_to_json(result.trace).dump(2) << '\n';
            detail::finish(os, p);
            outputs.push_back("trace.json");
        } else {
            const auto p = out_dir / "trace.csv";
            auto os = detail::open_for_write(p);
            write_trace_csv(os, result.trace);
            detail::finish(os, p);
            outputs.push_back("trace.csv");
        }
        std::optional<Peak> peak;
        if (result.spectrum) {
            const auto p = out_dir / "spectrum.csv";
            auto os = detail::open_for_write(p);
            write_spectrum_csv(os, *result.spectrum);
            detail::finish(os, p);
            outputs.push_back("spectrum.csv");
            if (result.spectrum->size() > 1) {
                peak = find_peak(*result.spectrum, result.spectrum->freqs[1], result.spectrum->freqs.back());
            }
        }

        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        nlohmann::json manifest;
        manifest["version"] = QCORR_VERSION;
        manifest["seed"] = result.seed;
        manifest["workers"] = options.workers;
        manifest["substep_dt_s"] = result.substep_dt;
        manifest["config"] = cfg.raw;
        manifest["outputs"] = outputs;
        manifest["wall_time_s"] = wall;
        if (peak) {
            manifest["peak"] = {{"freq_hz", peak->freq}, {"amplitude", peak->amplitude}, {"distinct", peak->distinct}};
        }
        const auto mp = out_dir / "manifest.json";
        auto os = detail::open_for_write(mp);
        os << manifest.dump(2) << '\n';
        detail::finish(os, mp);

        log << "wrote " << result.trace.size() << " delays to " << out_dir.string();
        if (peak) {
            log << "; spectrum peak " << peak->freq << " Hz (amplitude " << peak->amplitude << ")";
        }
        log << '\n';
        return kExitOk;
    } catch (const IoError& e) {
        log << "io error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::filesystem::filesystem_error& e) {
        log << "io error: " << e.what() << '\n';
        return kExitIo;
    } catch (const NumericalError& e) {
        log << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
}

// Re-analyze an existing trace file.
inline int spectrum_command(const std::filesystem::path& trace_path, const std::filesystem::path& out_dir,
                            Window window, std::ostream& log = std::cerr) {
    try {
        std::ifstream is(trace_path, std::ios::binary);
        if (!is) {
            throw IoError("cannot open '" + trace_path.string() + "'");
        }
        const CorrelationTrace trace = read_trace_csv(is);
        const Spectrum spec = spectrum(trace, window);
        detail::ensure_dir(out_dir);
        const auto p = out_dir / "spectrum.csv";
        auto os = detail::open_for_write(p);
        write_spectrum_csv(os, spec);
        detail::finish(os, p);
        if (spec.size() > 1) {
            const Peak peak = find_peak(spec, spec.freqs[1], spec.freqs.back());
            log << "peak " << peak.freq << " Hz amplitude " << peak.amplitude
                << (peak.distinct ? "" : " (no distinct peak)") << '\n';
        }
        return kExitOk;
    } catch (const IoError& e) {
        log << "io error: " << e.what() << '\n';
        return kExitIo;
    }
}

struct ValidationReport {
    std::size_t n_scenarios = 0;
    double max_abs_diff = 0.0;
    double calibrated_c = 0.0;
    std::vector<double> calibration_points;
    bool passed = false;
};

// Cross-checks PreparedSequence against the brute-force oracle on randomized
// one- and two-spin scenarios with an AC classical field, then calibrates the
// short-time constant. Delays are multiples of the noise grid, so both
// integrators see the same piecewise-linear b(t).
inline ValidationReport run_oracle_validation(std::uint64_t seed = 2024, std::size_t n_scenarios = 20,
                                              double tolerance = 1e-8) {
    ValidationReport report;
    report.n_scenarios = n_scenarios;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < n_scenarios; ++i) {
        const std::size_t n_spins = (i % 4 == 3) ? 2 : 1;
        std::vector<NuclearSpinParams> spins(n_spins);
        for (auto& s : spins) {
            s.a_par = kTwoPi * (-50e3 + 100e3 * u(rng));
            s.a_perp = kTwoPi * (10e3 + 190e3 * u(rng));
            s.p_z = -1.0 + 2.0 * u(rng);
        }
        const SpinSystem sys = build_bath(kTwoPi * (100e3 + 700e3 * u(rng)), spins);
        const double t_interr = 0.2e-6 + 1.8e-6 * u(rng);
        const double dt = t_interr / 256.0;
        const auto gap_cells = static_cast<std::size_t>(u(rng) * 2048.0);
        const double delay = t_interr + static_cast<double>(gap_cells) * dt;
        const ProtocolSequence seq =
            (i % 2 == 0) ? build_qc_sequence(t_interr, delay) : build_cc_sequence(t_interr, delay);

        NoiseModel ac;
        ac.kind = NoiseKind::ac;
        ac.amplitude = kTwoPi * 300e3 * u(rng);
        ac.frequency_hz = 50e3 + 950e3 * u(rng);
        ac.phase_rad = kTwoPi * u(rng);
        const NoiseTrajectory traj = sample_trajectory(ac, delay + t_interr, dt, i);

        const double fast = execute_exact(seq, sys, traj, dt).value;
        const double slow = oracle::oracle_execute(seq, sys, &traj, 512, 16);
        report.max_abs_diff = std::max(report.max_abs_diff, std::abs(fast - slow));
    }
    std::vector<oracle::CalibrationPoint> family;
    for (double a_hz : {20e3, 60.4e3}) {
        for (double t_interr : {50e-9, 100e-9}) {
            for (double p_z : {0.25, 1.0}) {
                family.push_back({kTwoPi * a_hz, t_interr, p_z, kTwoPi * 200e3});
            }
        }
    }
    const auto cal = oracle::calibrate_eq3_constant(family);
    report.calibrated_c = cal.constant;
    report.calibration_points = cal.per_point;
    report.passed = report.max_abs_diff <= tolerance && std::abs(cal.constant - 1.0) <= 0.02;
    return report;
}

struct PsdReport {
    Spectrum psd;
    double fwhm_hz = 0.0;  // 0 when not applicable
};

// Full width at half maximum of the dominant line of a power spectrum. A line
// at f = 0 is treated as the positive half of a symmetric one.
inline double estimate_fwhm(const Spectrum& psd) {
    if (psd.size() < 3) {
        throw std::invalid_argument("estimate_fwhm: spectrum too short");
    }
    std::size_t top = 0;
    for (std::size_t k = 1; k < psd.size(); ++k) {
        if (psd.amplitudes[k] > psd.amplitudes[top]) {
            top = k;
        }
    }
    if (top == 0) {
        return 2.0 * estimate_hwhm(psd);
    }
    const double half = 0.5 * psd.amplitudes[top];
    auto crossing = [&](int direction) {
        std::size_t k = top;
        while (true) {
            const std::size_t next = direction > 0 ? k + 1 : k - 1;
            if ((direction > 0 && next >= psd.size()) || (direction < 0 && k == 0)) {
                throw std::runtime_error("estimate_fwhm: line does not drop to half maximum");
            }
            if (psd.amplitudes[next] <= half) {
                const double a0 = psd.amplitudes[k];
                const double a1 = psd.amplitudes[next];
                const double frac = (a0 - half) / (a0 - a1);
                return psd.freqs[k] + frac * (psd.freqs[next] - psd.freqs[k]);
            }
            k = next;
        }
    };
    return crossing(+1) - crossing(-1);
}

inline PsdReport run_psd(const ScenarioConfig& cfg) {
    const NoiseModel model = make_noise_model(cfg);
    std::vector<NoiseTrajectory> trajectories;
    trajectories.reserve(cfg.psd.n_traj);
    for (std::size_t j = 0; j < cfg.psd.n_traj; ++j) {
        trajectories.push_back(sample_trajectory(model, cfg.psd.timeline_s, cfg.psd.dt_s, j));
    }
    PsdReport report;
    report.psd = psd_estimate(trajectories);
    if (model.kind != NoiseKind::none && model.kind != NoiseKind::white) {
        report.fwhm_hz = estimate_fwhm(report.psd);
    }
    return report;
}

}  // namespace qcorr
