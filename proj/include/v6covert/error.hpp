#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace v6covert {

enum class Errc {
  unreadable_capture,
  truncated_record,
  not_ipv6,
  truncated_packet,
  io,
  invalid_key,
  invalid_secret,
  ineligible_carrier,
  capacity,
  injection_infeasible,
  invalid_argument,
  degenerate_training,
  dimension_mismatch,
  model_load,
  csv_parse,
  config_parse,
};

std::string_view errc_name(Errc code) noexcept;

// Single exception type for every module; the code identifies the failure
// class and what() carries the human-readable diagnostic.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace v6covert
