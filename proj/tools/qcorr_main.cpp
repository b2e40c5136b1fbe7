// qcorr: scenario-driven QC/CC correlation sweeps.
//
//   qcorr run      --config fig3a.ini [--out DIR] [--workers N] [--seed U64]
//   qcorr sweep    (alias of run)
//   qcorr spectrum --trace out/trace.csv [--out DIR] [--window hann|rect]
//   qcorr validate [--seed U64]
//   qcorr psd      --config fig4b.ini [--out DIR] [--seed U64] [--dump-trajectory]

#include "qcorr/runner.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

qcorr::ScenarioConfig load(const std::string& path, qcorr::ScenarioScope scope) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw qcorr::IoError("cannot open config '" + path + "'");
    }
    std::ostringstream text;
    text << is.rdbuf();
    try {
        return qcorr::parse_scenario(text.str(), scope);
    } catch (const qcorr::ConfigError& e) {
        throw qcorr::ConfigError(path + ": " + e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"QC/CC correlation protocol simulator"};
    app.set_version_flag("--version", std::string(QCORR_VERSION));
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::size_t workers = 1;
    std::uint64_t seed = 0;

    auto* run = app.add_subcommand("run", "run the delay sweep of a scenario");
    run->alias("sweep");
    run->add_option("--config", config_path, "scenario .ini file")->required();
    run->add_option("--out", out_dir, "output directory (overrides output.path)");
    run->add_option("--workers", workers, "worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber);
    auto* run_seed = run->add_option("--seed", seed, "seed (overrides run.seed)");

    std::string trace_path;
    std::string window = "hann";
    auto* spec = app.add_subcommand("spectrum", "spectrum of an existing trace CSV");
    spec->add_option("--trace", trace_path, "trace CSV (delay_s,value,stderr)")->required();
    spec->add_option("--out", out_dir, "output directory")->default_val(".");
    spec->add_option("--window", window, "rect or hann")->check(CLI::IsMember({"rect", "hann"}));

    std::uint64_t validate_seed = 2024;
    auto* validate = app.add_subcommand("validate", "cross-check the executor against the oracle");
    validate->add_option("--seed", validate_seed, "seed of the random scenarios");

    bool dump = false;
    auto* psd = app.add_subcommand("psd", "estimate the power spectrum of the scenario's noise model");
    psd->add_option("--config", config_path, "scenario .ini file")->required();
    psd->add_option("--out", out_dir, "output directory (overrides output.path)");
    auto* psd_seed = psd->add_option("--seed", seed, "seed (overrides run.seed)");
    psd->add_flag("--dump-trajectory", dump, "also write trajectory_0.csv (t_s,b_rad_per_s)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            qcorr::ScenarioConfig cfg = load(config_path, qcorr::ScenarioScope::full);
            qcorr::RunOptions options;
            options.workers = workers;
            if (!out_dir.empty()) {
                options.out_dir = out_dir;
            }
            if (*run_seed) {
                options.seed = seed;
            }
            return qcorr::run_command(cfg, options);
        }
        if (*spec) {
            return qcorr::spectrum_command(trace_path, out_dir,
                                           window == "rect" ? qcorr::Window::rect : qcorr::Window::hann);
        }
        if (*validate) {
            const auto report = qcorr::run_oracle_validation(validate_seed);
            std::cout << "oracle cross-check: " << report.n_scenarios << " scenarios, max |exact - oracle| = "
                      << report.max_abs_diff << '\n';
            std::cout << "calibrated short-time constant c = " << report.calibrated_c << '\n';
            std::cout << (report.passed ? "PASS" : "FAIL") << '\n';
            return report.passed ? qcorr::kExitOk : qcorr::kExitNumerical;
        }
        if (*psd) {
            qcorr::ScenarioConfig cfg = load(config_path, qcorr::ScenarioScope::noise_only);
            if (*psd_seed) {
                cfg.run.seed = seed;
            }
            const std::filesystem::path dir = out_dir.empty() ? std::filesystem::path(cfg.output.path) : std::filesystem::path(out_dir);
            const auto report = qcorr::run_psd(cfg);
            qcorr::detail::ensure_dir(dir);
            {
                auto os = qcorr::detail::open_for_write(dir / "psd.csv");
                qcorr::write_spectrum_csv(os, report.psd, "psd");
                qcorr::detail::finish(os, dir / "psd.csv");
            }
            if (dump) {
                const auto traj = qcorr::sample_trajectory(qcorr::make_noise_model(cfg), cfg.psd.timeline_s,
                                                           cfg.psd.dt_s, 0);
                auto os = qcorr::detail::open_for_write(dir / "trajectory_0.csv");
                qcorr::write_trajectory_csv(os, traj);
                qcorr::detail::finish(os, dir / "trajectory_0.csv");
            }
            std::cout << "psd: " << cfg.psd.n_traj << " trajectories, resolution " << report.psd.resolution
                      << " Hz";
            if (report.fwhm_hz > 0.0) {
                std::cout << ", estimated FWHM " << report.fwhm_hz << " Hz";
            }
            std::cout << '\n';
            return qcorr::kExitOk;
        }
    } catch (const qcorr::IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return qcorr::kExitIo;
    } catch (const qcorr::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return qcorr::kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return qcorr::kExitConfig;
    }
    return qcorr::kExitOk;
}
