#include "abc/errors.hpp"

namespace abc {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_bandwidth: return "invalid bandwidth";
    case ErrorCode::empty_data: return "empty data";
    case ErrorCode::degenerate_weights: return "degenerate weights";
    case ErrorCode::domain: return "domain error";
    case ErrorCode::invalid_df: return "invalid degrees of freedom";
    case ErrorCode::shape: return "shape error";
    case ErrorCode::singular_design: return "singular design";
    case ErrorCode::training_divergence: return "training divergence";
    case ErrorCode::config: return "config error";
    case ErrorCode::empty_posterior: return "empty posterior";
    case ErrorCode::degenerate_region: return "degenerate region";
    case ErrorCode::low_mass: return "low prior mass";
    case ErrorCode::undefined_rmae: return "undefined RMAE";
    case ErrorCode::simulation: return "simulation failure";
    case ErrorCode::io: return "i/o error";
  }
  return "error";
}

}  // namespace abc
