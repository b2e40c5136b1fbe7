#pragma once

// Classical stochastic fields b(t) (rad/s) added to the sensor coupling.
//
// Every trajectory is a pure function of (seed_base, trajectory_index): its
// random numbers come from a private generator seeded from that key, so
// trajectories can be produced in any order or on any thread.

#include "qcorr/linalg.hpp"
#include "qcorr/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qcorr {

enum class NoiseKind { none, ac, random_phase_ac, ou_lorentzian, white };

inline std::string_view to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::none: return "none";
        case NoiseKind::ac: return "ac";
        case NoiseKind::random_phase_ac: return "random_phase_ac";
        case NoiseKind::ou_lorentzian: return "ou_lorentzian";
        case NoiseKind::white: return "white";
    }
    return "?";
}

inline std::optional<NoiseKind> parse_noise_kind(std::string_view s) {
    for (auto k : {NoiseKind::none, NoiseKind::ac, NoiseKind::random_phase_ac,
                   NoiseKind::ou_lorentzian, NoiseKind::white}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    return std::nullopt;
}

// amplitude meaning per kind:
//   ac, random_phase_ac  peak amplitude A of A cos(2 pi f t + theta), rad/s
//   ou_lorentzian        stationary standard deviation sigma of the OU envelope, rad/s
//   white                sqrt of the two-sided power density; samples have variance sigma^2/dt
// Band-centred OU (center_hz > 0) is sigma x(t) cos(2 pi f_c t + theta) with a uniform
// random theta per trajectory, so its variance is sigma^2/2.
struct NoiseModel {
    NoiseKind kind = NoiseKind::none;
    double amplitude = 0.0;
    double frequency_hz = 0.0;
    double phase_rad = 0.0;  // theta_0 of the deterministic ac kind
    double fwhm_hz = 0.0;
    double center_hz = 0.0;
    std::uint64_t seed_base = 0;

    // Lorentzian S(f) ~ 1/(1 + (2 pi f tau)^2) has full width 1/(pi tau).
    double correlation_time() const { return 1.0 / (kPi * fwhm_hz); }

    void validate() const {
        if (!std::isfinite(amplitude)) {
            throw std::invalid_argument("noise: amplitude must be finite");
        }
        if (!(frequency_hz >= 0.0) || !(center_hz >= 0.0)) {
            throw std::invalid_argument("noise: frequencies must be >= 0");
        }
        if (kind == NoiseKind::ou_lorentzian && !(fwhm_hz > 0.0)) {
            throw std::invalid_argument("noise: ou_lorentzian requires fwhm > 0");
        }
    }
};

// Random streams of one trajectory. `stream` separates independent uses of the
// same key (noise path, phase-randomization angles, ...).
inline std::mt19937_64 make_rng(std::uint64_t seed_base, std::uint64_t index, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed_base), static_cast<std::uint32_t>(seed_base >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      static_cast<std::uint32_t>(stream), 0x51c0ffeeu};
    return std::mt19937_64(seq);
}

// Sampled b(t) on one or more uniform grid segments. A trajectory produced by
// sample_trajectory() has a single segment covering [0, timeline]; the
// windowed sampler produces one segment per requested window.
struct NoiseTrajectory {
    struct Segment {
        double t0 = 0.0;
        std::vector<double> samples;

        double t_end(double dt) const {
            return samples.empty() ? t0 : t0 + dt * static_cast<double>(samples.size() - 1);
        }
    };

    double dt = 0.0;
    std::uint64_t trajectory_index = 0;
    std::vector<Segment> segments;

    const std::vector<double>& samples() const { return segments.at(0).samples; }

    bool covers(double t_begin, double t_end) const {
        return find_segment(t_begin, t_end) != nullptr;
    }

    // Linear interpolation between grid points; t must lie inside one segment.
    double value_at(double t) const {
        const Segment* seg = find_segment(t, t);
        if (seg == nullptr) {
            throw std::out_of_range("noise trajectory does not cover t=" + std::to_string(t));
        }
        if (seg->samples.size() == 1) {
            return seg->samples[0];
        }
        const double u = (t - seg->t0) / dt;
        const auto last = static_cast<double>(seg->samples.size() - 1);
        const double uc = std::clamp(u, 0.0, last);
        auto k = static_cast<std::size_t>(std::floor(uc));
        if (k >= seg->samples.size() - 1) {
            k = seg->samples.size() - 2;
        }
        const double frac = uc - static_cast<double>(k);
        return seg->samples[k] + frac * (seg->samples[k + 1] - seg->samples[k]);
    }

    // Integral of the interpolant over [t_begin, t_end] by the midpoint rule on
    // n equal substeps.
    double integrate(double t_begin, double t_end, std::size_t n_substeps) const {
        if (n_substeps == 0 || t_end <= t_begin) {
            return 0.0;
        }
        const double h = (t_end - t_begin) / static_cast<double>(n_substeps);
        double acc = 0.0;
        for (std::size_t k = 0; k < n_substeps; ++k) {
            acc += value_at(t_begin + (static_cast<double>(k) + 0.5) * h);
        }
        return acc * h;
    }

private:
    const Segment* find_segment(double t_begin, double t_end) const {
        // Grid times are t0 + k dt; allow rounding slack at the edges.
        const double slack = 1e-9 * std::max(dt, 1e-300) + 1e-15 * std::abs(t_end);
        for (const auto& s : segments) {
            if (t_begin >= s.t0 - slack && t_end <= s.t_end(dt) + slack) {
                return &s;
            }
        }
        return nullptr;
    }
};

namespace detail {

// Draws the process at a non-decreasing sequence of times. Exact for every kind:
// the OU state is propagated with its exact transition kernel between
// successive requested times, whatever their spacing.
class PathSampler {
public:
    PathSampler(const NoiseModel& model, std::uint64_t traj_index, double dt)
        : model_(model), rng_(make_rng(model.seed_base, traj_index)), dt_(dt) {
        std::uniform_real_distribution<double> phase(0.0, kTwoPi);
        switch (model_.kind) {
            case NoiseKind::ac: theta_ = model_.phase_rad; break;
            case NoiseKind::random_phase_ac: theta_ = phase(rng_); break;
            case NoiseKind::ou_lorentzian:
                tau_ = model_.correlation_time();
                if (model_.center_hz > 0.0) {
                    theta_ = phase(rng_);
                }
                break;
            default: break;
        }
    }

    double at(double t) {
        switch (model_.kind) {
            case NoiseKind::none: return 0.0;
            case NoiseKind::ac:
            case NoiseKind::random_phase_ac:
                return model_.amplitude * std::cos(kTwoPi * model_.frequency_hz * t + theta_);
            case NoiseKind::white: return model_.amplitude / std::sqrt(dt_) * gauss_(rng_);
            case NoiseKind::ou_lorentzian: {
                if (!started_) {
                    // stationary start
                    x_ = model_.amplitude * gauss_(rng_);
                    started_ = true;
                } else {
                    const double a = std::exp(-(t - t_last_) / tau_);
                    x_ = a * x_ + model_.amplitude * std::sqrt(std::max(0.0, 1.0 - a * a)) * gauss_(rng_);
                }
                t_last_ = t;
                if (model_.center_hz > 0.0) {
                    return x_ * std::cos(kTwoPi * model_.center_hz * t + theta_);
                }
                return x_;
            }
        }
        throw std::invalid_argument("noise: unknown kind");
    }

private:
    NoiseModel model_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> gauss_{0.0, 1.0};
    double dt_;
    double theta_ = 0.0;
    double tau_ = 0.0;
    double x_ = 0.0;
    double t_last_ = 0.0;
    bool started_ = false;
};

inline std::size_t grid_points(double span, double dt) {
    // ceil(span/dt) + 1 with a tolerance for spans that are float multiples of dt
    const double r = span / dt;
    const double rounded = std::round(r);
    const double cells = std::abs(r - rounded) < 1e-9 * std::max(1.0, r) ? rounded : std::ceil(r);
    return static_cast<std::size_t>(cells) + 1;
}

inline void check_grid(double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw std::invalid_argument("noise: dt must be positive");
    }
}

}  // namespace detail

// One realization of b(t) on t = k dt, k = 0 .. ceil(timeline/dt).
inline NoiseTrajectory sample_trajectory(const NoiseModel& model, double timeline, double dt,
                                         std::uint64_t traj_index) {
    detail::check_grid(dt);
    if (!(timeline >= dt)) {
        throw std::invalid_argument("noise: timeline must be >= dt");
    }
    model.validate();
    NoiseTrajectory traj;
    traj.dt = dt;
    traj.trajectory_index = traj_index;
    auto& seg = traj.segments.emplace_back();
    seg.samples.resize(detail::grid_points(timeline, dt));
    detail::PathSampler sampler(model, traj_index, dt);
    for (std::size_t k = 0; k < seg.samples.size(); ++k) {
        seg.samples[k] = sampler.at(static_cast<double>(k) * dt);
    }
    return traj;
}

// Same process restricted to the given windows [t_begin, t_end], ordered by start.
// Statistically identical to slicing a full trajectory, at a cost proportional to
// the total window length instead of the timeline.
inline NoiseTrajectory sample_windows(const NoiseModel& model,
                                      const std::vector<std::pair<double, double>>& windows, double dt,
                                      std::uint64_t traj_index) {
    detail::check_grid(dt);
    model.validate();
    NoiseTrajectory traj;
    traj.dt = dt;
    traj.trajectory_index = traj_index;
    // Touching or overlapping windows share one segment.
    std::vector<std::pair<double, double>> merged;
    for (const auto& [t0, t1] : windows) {
        if (t1 < t0 || (!merged.empty() && t0 < merged.back().first)) {
            throw std::invalid_argument("noise: windows must be ordered");
        }
        const double grid_end = merged.empty()
                                    ? -std::numeric_limits<double>::infinity()
                                    : merged.back().first +
                                          dt * static_cast<double>(detail::grid_points(
                                                   std::max(merged.back().second - merged.back().first, dt), dt) - 1);
        if (!merged.empty() && t0 <= grid_end + 1e-9 * dt) {
            merged.back().second = std::max(merged.back().second, t1);
        } else {
            merged.emplace_back(t0, t1);
        }
    }
    detail::PathSampler sampler(model, traj_index, dt);
    for (const auto& [t0, t1] : merged) {
        auto& seg = traj.segments.emplace_back();
        seg.t0 = t0;
        seg.samples.resize(detail::grid_points(std::max(t1 - t0, dt), dt));
        for (std::size_t k = 0; k < seg.samples.size(); ++k) {
            seg.samples[k] = sampler.at(t0 + static_cast<double>(k) * dt);
        }
    }
    return traj;
}

// Averaged one-sided periodogram, (rad/s)^2 / Hz. For a stationary process this
// estimates S(f) = 2 * integral of the autocorrelation, e.g. 4 sigma^2 tau / (1 + (2 pi f tau)^2)
// for the OU process. Every bin, DC included, is read as a sample of that density,
// so all bins carry the factor 2.
inline Spectrum psd_estimate(const std::vector<NoiseTrajectory>& trajectories) {
    if (trajectories.size() < 2) {
        throw std::invalid_argument("psd_estimate: need at least 2 trajectories");
    }
    const auto& ref = trajectories.front();
    if (ref.segments.size() != 1 || ref.samples().size() < 2) {
        throw std::invalid_argument("psd_estimate: trajectories must be single dense grids");
    }
    const std::size_t n = ref.samples().size();
    const double dt = ref.dt;
    for (const auto& tr : trajectories) {
        if (tr.segments.size() != 1 || tr.samples().size() != n || tr.dt != dt ||
            tr.segments[0].t0 != ref.segments[0].t0) {
            throw std::invalid_argument("psd_estimate: mismatched grids");
        }
    }
    Spectrum out;
    out.freqs = dft_frequencies(n, dt);
    out.resolution = 1.0 / (static_cast<double>(n) * dt);
    out.amplitudes.assign(out.freqs.size(), 0.0);
    for (const auto& tr : trajectories) {
        const auto x = real_dft(tr.samples());
        for (std::size_t k = 0; k < x.size(); ++k) {
            out.amplitudes[k] += 2.0 * std::norm(x[k]);
        }
    }
    const double scale = dt / (static_cast<double>(n) * static_cast<double>(trajectories.size()));
    for (auto& a : out.amplitudes) {
        a *= scale;
    }
    return out;
}

// Half width at half maximum of a low-pass (maximum near f = 0) power spectrum.
// The reference level is the mean of the first `n_ref` bins; the crossing is
// linearly interpolated.
inline double estimate_hwhm(const Spectrum& psd, std::size_t n_ref = 1) {
    if (psd.size() < 2 || n_ref == 0 || n_ref >= psd.size()) {
        throw std::invalid_argument("estimate_hwhm: spectrum too short");
    }
    double ref = 0.0;
    for (std::size_t k = 0; k < n_ref; ++k) {
        ref += psd.amplitudes[k];
    }
    const double half = 0.5 * ref / static_cast<double>(n_ref);
    for (std::size_t k = 1; k < psd.size(); ++k) {
        if (psd.amplitudes[k] <= half) {
            const double a0 = psd.amplitudes[k - 1];
            const double a1 = psd.amplitudes[k];
            const double frac = (a0 == a1) ? 0.0 : (a0 - half) / (a0 - a1);
            return psd.freqs[k - 1] + frac * (psd.freqs[k] - psd.freqs[k - 1]);
        }
    }
    throw std::runtime_error("estimate_hwhm: spectrum never drops to half maximum");
}

inline void write_trajectory_csv(std::ostream& os, const NoiseTrajectory& traj) {
    const auto old_precision = os.precision(17);
    os << "t_s,b_rad_per_s\n";
    for (const auto& seg : traj.segments) {
        for (std::size_t k = 0; k < seg.samples.size(); ++k) {
            os << seg.t0 + static_cast<double>(k) * traj.dt << ',' << seg.samples[k] << '\n';
        }
    }
    os.precision(old_precision);
}

}  // namespace qcorr
