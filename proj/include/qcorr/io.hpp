#pragma once

// CSV and JSON serialization of traces and spectra. Numbers are written with
// 17 significant digits so that reading a file back reproduces every double.

#include "qcorr/spectral.hpp"
#include "qcorr/trace.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qcorr {

inline std::string format_double(double v) {
    char buf[40];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf, static_cast<std::size_t>(n));
}

inline void write_trace_csv(std::ostream& os, const CorrelationTrace& trace) {
    os << "delay_s,value,stderr\n";
    for (std::size_t k = 0; k < trace.size(); ++k) {
        os << format_double(trace.delays[k]) << ',' << format_double(trace.values[k]) << ','
           << format_double(trace.stderrs[k]) << '\n';
    }
}

inline void write_spectrum_csv(std::ostream& os, const Spectrum& spec, std::string_view value_column = "amplitude") {
    os << "freq_hz," << value_column << '\n';
    for (std::size_t k = 0; k < spec.size(); ++k) {
        os << format_double(spec.freqs[k]) << ',' << format_double(spec.amplitudes[k]) << '\n';
    }
}

inline nlohmann::json trace_to_json(const CorrelationTrace& trace) {
    return {{"delay_s", trace.delays}, {"value", trace.values}, {"stderr", trace.stderrs}, {"meta", trace.meta}};
}

namespace detail {

inline double parse_csv_double(std::string_view s, int line) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw std::runtime_error("trace csv line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
    }
    return v;
}

}  // namespace detail

inline CorrelationTrace read_trace_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) {
        throw std::runtime_error("trace csv: empty input");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    if (line != "delay_s,value,stderr") {
        throw std::runtime_error("trace csv: expected header 'delay_s,value,stderr'");
    }
    CorrelationTrace trace;
    int line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos) {
            throw std::runtime_error("trace csv line " + std::to_string(line_no) + ": expected 3 columns");
        }
        const std::string_view view(line);
        trace.delays.push_back(detail::parse_csv_double(view.substr(0, c1), line_no));
        trace.values.push_back(detail::parse_csv_double(view.substr(c1 + 1, c2 - c1 - 1), line_no));
        trace.stderrs.push_back(detail::parse_csv_double(view.substr(c2 + 1), line_no));
    }
    trace.validate();
    return trace;
}

}  // namespace qcorr
