#pragma once

// Closed-form second-order predictions and spectral analysis of correlation traces.

#include "qcorr/linalg.hpp"
#include "qcorr/spectral.hpp"
#include "qcorr/spin_system.hpp"
#include "qcorr/trace.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qcorr {

// Bath average <O> = norm * Tr_B{O rho_B} / 2. Exact evolution of the protocols
// fixes norm = 2, i.e. <O> is the plain bath expectation value; with it the
// second-order signals are
//     S_Q = -i/2 <[phi_2, phi_1]>,   S_C = 1/2 <{phi_2, phi_1}>,
// and for one spin-1/2 with I = sigma/2
//     S_Q = c (A_perp t_I)^2 / 4 * p_z * sin(omega delay),   c = 1.
// Both constants are re-derived by oracle::calibrate_eq3_constant().
inline constexpr double kBathAverageNorm = 2.0;
inline constexpr double kShortTimeConstant = 1.0;

namespace detail {

inline complex bath_trace(const ComplexMatrix& op, const SpinSystem& sys) {
    return (op * sys.rho_bath).trace();
}

}  // namespace detail

// t1, t2: start times of the two interrogation windows; the phase operators
// are taken at the window midpoints.
inline double predict_qc_eq1(const SpinSystem& sys, double t_interr, double t1, double t2,
                             double norm = kBathAverageNorm) {
    const ComplexMatrix phi1 = phase_operator(sys, t_interr, t1 + t_interr / 2.0);
    const ComplexMatrix phi2 = phase_operator(sys, t_interr, t2 + t_interr / 2.0);
    const complex avg = norm * detail::bath_trace(commutator(phi2, phi1), sys) / 2.0;
    const complex s = -kI / 2.0 * avg;
    if (std::abs(s.imag()) > 1e-12 * std::max(1.0, std::abs(s))) {
        throw std::logic_error("predict_qc_eq1: non-real commutator average");
    }
    return s.real();
}

inline double predict_cc_eq2(const SpinSystem& sys, double t_interr, double t1, double t2,
                             double norm = kBathAverageNorm) {
    const ComplexMatrix phi1 = phase_operator(sys, t_interr, t1 + t_interr / 2.0);
    const ComplexMatrix phi2 = phase_operator(sys, t_interr, t2 + t_interr / 2.0);
    const complex avg = norm * detail::bath_trace(anticommutator(phi2, phi1), sys) / 2.0;
    const complex s = avg / 2.0;
    if (std::abs(s.imag()) > 1e-12 * std::max(1.0, std::abs(s))) {
        throw std::logic_error("predict_cc_eq2: non-real anticommutator average");
    }
    return s.real();
}

inline double predict_qc_eq3(double a_perp, double t_interr, double p_z, double omega, double delay,
                             double c = kShortTimeConstant) {
    return c * (a_perp * a_perp * t_interr * t_interr / 4.0) * p_z * std::sin(omega * delay);
}

enum class Window { rect, hann };

inline std::string_view to_string(Window w) { return w == Window::rect ? "rect" : "hann"; }

inline std::vector<double> window_weights(Window w, std::size_t n) {
    std::vector<double> out(n, 1.0);
    if (w == Window::hann && n > 1) {
        for (std::size_t k = 0; k < n; ++k) {
            out[k] = 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(k) / static_cast<double>(n - 1)));
        }
    }
    return out;
}

// Uniform delay step of a trace; throws for a non-uniform grid.
inline double uniform_step(const CorrelationTrace& trace) {
    trace.validate();
    if (trace.size() < 2) {
        throw std::invalid_argument("spectrum: need at least 2 delays");
    }
    const double step = (trace.delays.back() - trace.delays.front()) / static_cast<double>(trace.size() - 1);
    for (std::size_t k = 1; k < trace.size(); ++k) {
        if (std::abs(trace.delays[k] - trace.delays[k - 1] - step) > 1e-6 * step) {
            throw std::invalid_argument("spectrum: delay grid is not uniform");
        }
    }
    return step;
}

// Complex DFT of the mean-removed, windowed trace, k = 0 .. N/2. The delay of
// the first sample is the time origin of the phases.
inline std::vector<complex> trace_dft(const CorrelationTrace& trace, Window window) {
    uniform_step(trace);
    const std::size_t n = trace.size();
    double mean = 0.0;
    for (double v : trace.values) {
        mean += v;
    }
    mean /= static_cast<double>(n);
    const auto w = window_weights(window, n);
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) {
        x[k] = (trace.values[k] - mean) * w[k];
    }
    return real_dft(x);
}

// Single-sided amplitude spectrum: a sinusoid a sin(2 pi f d) sitting on a bin
// shows up with amplitude a (coherent-gain corrected for the window).
inline Spectrum spectrum(const CorrelationTrace& trace, Window window = Window::rect) {
    const double step = uniform_step(trace);
    const std::size_t n = trace.size();
    const auto x = trace_dft(trace, window);
    double gain = 0.0;
    for (double w : window_weights(window, n)) {
        gain += w;
    }
    Spectrum out;
    out.freqs = dft_frequencies(n, step);
    out.resolution = 1.0 / (static_cast<double>(n) * step);
    out.amplitudes.resize(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const bool unpaired = (k == 0) || (n % 2 == 0 && k == n / 2);
        out.amplitudes[k] = (unpaired ? 1.0 : 2.0) * std::abs(x[k]) / gain;
    }
    return out;
}

struct Peak {
    double freq = 0.0;
    double amplitude = 0.0;
    std::size_t bin = 0;
    bool distinct = false;  // max >= 2 x median of the band
};

// Largest bin in [f_lo, f_hi] (lowest frequency on ties), refined by a
// three-point parabola through its neighbours.
inline Peak find_peak(const Spectrum& spec, double f_lo, double f_hi) {
    std::vector<std::size_t> bins;
    for (std::size_t k = 0; k < spec.size(); ++k) {
        if (spec.freqs[k] >= f_lo && spec.freqs[k] <= f_hi) {
            bins.push_back(k);
        }
    }
    if (bins.empty()) {
        throw std::invalid_argument("find_peak: band [" + std::to_string(f_lo) + ", " + std::to_string(f_hi) +
                                    "] Hz contains no bins");
    }
    std::size_t best = bins.front();
    for (std::size_t k : bins) {
        if (spec.amplitudes[k] > spec.amplitudes[best]) {
            best = k;
        }
    }
    Peak p;
    p.bin = best;
    p.freq = spec.freqs[best];
    p.amplitude = spec.amplitudes[best];
    if (best > 0 && best + 1 < spec.size()) {
        const double a = spec.amplitudes[best - 1];
        const double b = spec.amplitudes[best];
        const double c = spec.amplitudes[best + 1];
        const double denom = a - 2.0 * b + c;
        if (denom < 0.0) {
            const double delta = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
            p.freq += delta * spec.resolution;
            p.amplitude = b - 0.25 * (a - c) * delta;
        }
    }
    std::vector<double> band;
    band.reserve(bins.size());
    for (std::size_t k : bins) {
        band.push_back(spec.amplitudes[k]);
    }
    std::nth_element(band.begin(), band.begin() + static_cast<std::ptrdiff_t>(band.size() / 2), band.end());
    const double median = band[band.size() / 2];
    p.distinct = spec.amplitudes[best] >= 2.0 * median && spec.amplitudes[best] > 0.0;
    return p;
}

struct SinusoidFit {
    double freq = 0.0;
    double sin_coeff = 0.0;  // value ~ sin_coeff sin(2 pi f d) + cos_coeff cos(2 pi f d) + offset
    double cos_coeff = 0.0;
    double offset = 0.0;
    double residual = 0.0;  // sum of squared residuals

    double amplitude() const { return std::hypot(sin_coeff, cos_coeff); }
};

// Linear least squares at a fixed frequency; the phase origin is delay = 0.
inline SinusoidFit fit_sinusoid(const CorrelationTrace& trace, double freq_hz) {
    trace.validate();
    const auto n = static_cast<Eigen::Index>(trace.size());
    if (n < 3) {
        throw std::invalid_argument("fit_sinusoid: need at least 3 points");
    }
    Eigen::MatrixXd design(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double arg = kTwoPi * freq_hz * trace.delays[static_cast<std::size_t>(k)];
        design(k, 0) = std::sin(arg);
        design(k, 1) = std::cos(arg);
        design(k, 2) = 1.0;
        y(k) = trace.values[static_cast<std::size_t>(k)];
    }
    const Eigen::VectorXd coeff = design.colPivHouseholderQr().solve(y);
    SinusoidFit fit;
    fit.freq = freq_hz;
    fit.sin_coeff = coeff(0);
    fit.cos_coeff = coeff(1);
    fit.offset = coeff(2);
    fit.residual = (design * coeff - y).squaredNorm();
    return fit;
}

// Frequency minimizing the fit residual inside [f_lo, f_hi] (golden section);
// the bracket must contain a single residual minimum.
inline SinusoidFit fit_sinusoid_frequency(const CorrelationTrace& trace, double f_lo, double f_hi,
                                          int iterations = 100) {
    if (!(f_hi > f_lo)) {
        throw std::invalid_argument("fit_sinusoid_frequency: empty bracket");
    }
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = f_lo;
    double b = f_hi;
    double c = b - g * (b - a);
    double d = a + g * (b - a);
    double fc = fit_sinusoid(trace, c).residual;
    double fd = fit_sinusoid(trace, d).residual;
    for (int it = 0; it < iterations && (b - a) > 1e-12 * std::abs(b); ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = fit_sinusoid(trace, c).residual;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = fit_sinusoid(trace, d).residual;
        }
    }
    return fit_sinusoid(trace, 0.5 * (a + b));
}

}  // namespace qcorr
