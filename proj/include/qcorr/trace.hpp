#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace qcorr {

// Correlation signal as a function of the delay between interrogation windows.
struct CorrelationTrace {
    std::vector<double> delays;   // s
    std::vector<double> values;   // <sigma> of the measured axis
    std::vector<double> stderrs;  // Monte Carlo standard error, 0 for exact runs
    std::string meta;

    std::size_t size() const { return delays.size(); }

    void validate() const {
        if (values.size() != delays.size() || stderrs.size() != delays.size()) {
            throw std::invalid_argument("trace: column lengths differ");
        }
        for (std::size_t k = 1; k < delays.size(); ++k) {
            if (!(delays[k] > delays[k - 1])) {
                throw std::invalid_argument("trace: delays must be strictly increasing");
            }
        }
    }
};

}  // namespace qcorr
