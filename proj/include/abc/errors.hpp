#pragma once

#include <stdexcept>
#include <string>

namespace abc {

enum class ErrorCode {
  invalid_bandwidth,
  empty_data,
  degenerate_weights,
  domain,
  invalid_df,
  shape,
  singular_design,
  training_divergence,
  config,
  empty_posterior,
  degenerate_region,
  low_mass,
  undefined_rmae,
  simulation,
  io,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace abc
