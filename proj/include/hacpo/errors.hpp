#pragma once

#include <stdexcept>
#include <string>

namespace hacpo {

// Base class for all library errors.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A value violates an operation's precondition (bad symbol, empty input, ...).
struct invalid_input_error : error {
  using error::error;
};

// A configuration is internally inconsistent or infeasible.
struct config_error : error {
  using error::error;
};

// Two agents are configured in a way the heterogeneity machinery cannot
// bridge (e.g. disjoint alphabets).
struct heterogeneity_error : config_error {
  using config_error::config_error;
};

// Capability statistics requested before any batch was recorded.
struct cold_start_error : error {
  using error::error;
};

// An exact enumeration would exceed its size budget.
struct budget_error : error {
  using error::error;
};

// Two inputs that must describe the same batch do not.
struct consistency_error : error {
  using error::error;
};

// A directory or file expected to hold results has none.
struct no_data_error : error {
  using error::error;
};

// Filesystem failures, annotated with the offending path.
struct io_error : error {
  using error::error;
};

}  // namespace hacpo
