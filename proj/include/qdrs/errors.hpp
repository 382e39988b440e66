#pragma once

#include <stdexcept>
#include <string>

namespace qdrs {

// Caller violated a precondition (bad dimensions, out-of-range parameter, ...).
// The CLI maps this to exit code 2.
class usage_error : public std::invalid_argument {
 public:
  explicit usage_error(const std::string& what) : std::invalid_argument(what) {}
};

// Something failed while running (I/O, divergence, search failure).
class runtime_failure : public std::runtime_error {
 public:
  explicit runtime_failure(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
inline void require(bool ok, const char* msg) {
  if (!ok) throw usage_error(msg);
}
inline void require(bool ok, const std::string& msg) {
  if (!ok) throw usage_error(msg);
}
}  // namespace detail

}  // namespace qdrs
