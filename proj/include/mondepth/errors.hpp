#pragma once

#include <stdexcept>
#include <string>

namespace mondepth {

// Domain error categories. The CLI maps any of these to exit code 1;
// usage errors (bad flags) are handled by the parser and exit with 2.

struct insufficient_data : std::runtime_error {
  explicit insufficient_data(const std::string& msg) : std::runtime_error(msg) {}
};

struct degenerate_fit : std::runtime_error {
  explicit degenerate_fit(const std::string& msg) : std::runtime_error(msg) {}
};

struct invalid_input : std::runtime_error {
  explicit invalid_input(const std::string& msg) : std::runtime_error(msg) {}
};

struct io_error : std::runtime_error {
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct training_aborted : std::runtime_error {
  explicit training_aborted(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mondepth
