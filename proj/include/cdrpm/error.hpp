#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cdrpm {

enum class Errc {
  invalid_input,
  unsorted_input,
  clipping_exhausted,
  unresolved_region,
  empty_log,
  mismatched_log,
  empty_selection,
  empty_model,
  degenerate_input,
  class_mismatch,
  invalid_config,
  scenario_mismatch,
  dependency_missing,
  io_error,
};

std::string_view to_string(Errc code) noexcept;

/// Library-wide exception. The code lets callers (the CLI in particular)
/// map failures onto exit statuses without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace cdrpm
