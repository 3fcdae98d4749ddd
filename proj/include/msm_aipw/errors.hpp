#pragma once

#include <stdexcept>
#include <string>

namespace msm_aipw {

// Malformed or inadmissible input data (bad CSV, single-arm sample, ...).
class data_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure of a fitter or solver: separation, monotone likelihood,
// rank deficiency, no root in range, degenerate information.
class fit_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Too many failed replicates in a Monte Carlo study.
class replicate_failure_error : public fit_error {
public:
    using fit_error::fit_error;
};

}  // namespace msm_aipw
