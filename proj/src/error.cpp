#include "v6covert/error.hpp"

namespace v6covert {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::unreadable_capture: return "unreadable-capture";
    case Errc::truncated_record: return "truncated-record";
    case Errc::not_ipv6: return "not-ipv6";
    case Errc::truncated_packet: return "truncated";
    case Errc::io: return "io";
    case Errc::invalid_key: return "invalid-key";
    case Errc::invalid_secret: return "invalid-secret";
    case Errc::ineligible_carrier: return "ineligible-carrier";
    case Errc::capacity: return "capacity";
    case Errc::injection_infeasible: return "injection-infeasible";
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::degenerate_training: return "degenerate-training";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::model_load: return "model-load";
    case Errc::csv_parse: return "csv-parse";
    case Errc::config_parse: return "config-parse";
  }
  return "unknown";
}

}  // namespace v6covert
