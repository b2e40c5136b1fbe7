#pragma once

// Real-input DFT on top of FFTW and the Spectrum value type shared by the
// noise and analysis modules.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

namespace qcorr {

// One-sided, frequency-indexed values. Depending on the producer the values
// are magnitudes (spectrum()) or power densities (psd_estimate()).
struct Spectrum {
    std::vector<double> freqs;       // Hz, uniform from 0 to Nyquist
    std::vector<double> amplitudes;  // >= 0
    double resolution = 0.0;         // Hz, bin spacing

    std::size_t size() const { return freqs.size(); }
};

namespace detail {

// FFTW's planner is not re-entrant; execution on distinct buffers is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

}  // namespace detail

// Non-negative-frequency half of the DFT of a real sequence:
// X_k = sum_n x_n exp(-2 pi i k n / N), k = 0 .. N/2.
inline std::vector<std::complex<double>> real_dft(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n == 0) {
        return {};
    }
    const std::size_t n_out = n / 2 + 1;
    std::unique_ptr<double, detail::FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
    std::unique_ptr<fftw_complex, detail::FftwFree> out(
        static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_out)));
    if (!in || !out) {
        throw std::bad_alloc();
    }
    fftw_plan plan;
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
    }
    std::copy(x.begin(), x.end(), in.get());
    fftw_execute(plan);
    std::vector<std::complex<double>> result(n_out);
    for (std::size_t k = 0; k < n_out; ++k) {
        result[k] = {out.get()[k][0], out.get()[k][1]};
    }
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    return result;
}

// Frequencies of the bins returned by real_dft for sample spacing `step`.
inline std::vector<double> dft_frequencies(std::size_t n, double step) {
    std::vector<double> f(n / 2 + 1);
    const double df = 1.0 / (static_cast<double>(n) * step);
    for (std::size_t k = 0; k < f.size(); ++k) {
        f[k] = static_cast<double>(k) * df;
    }
    return f;
}

}  // namespace qcorr
