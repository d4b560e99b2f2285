#pragma once

#include <stdexcept>
#include <string>

namespace rcgps {

// Base class for everything thrown by this library. The CLI maps these to
// exit codes: data_error -> 2, convergence_error -> 3.
class error : public std::runtime_error {
public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed inputs: bad CSV cells, schema violations, invalid specs,
// degenerate data (empty categories, all-zero weights, ...).
class data_error : public error {
public:
  using error::error;
};

// Iterative fits that failed to converge or hit numerical trouble.
class convergence_error : public error {
public:
  using error::error;
};

class parse_error : public data_error {
public:
  using data_error::data_error;
};

class schema_error : public data_error {
public:
  using data_error::data_error;
};

// Rank-deficient regression design; names the collinear columns.
class singular_design_error : public convergence_error {
public:
  using convergence_error::convergence_error;
};

// Complete or quasi-complete separation in the multinomial logit.
class separation_error : public convergence_error {
public:
  using convergence_error::convergence_error;
};

// A unit with an observed category whose fitted probability is zero.
class positivity_error : public data_error {
public:
  using data_error::data_error;
};

}  // namespace rcgps
