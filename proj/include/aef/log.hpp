#pragma once

#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace aef {

// User-facing input/argument problem; the CLI maps this to exit code 2.
struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void warn(const std::string& msg) { std::cerr << "[warn] " << msg << "\n"; }
inline void info(const std::string& msg) { std::cerr << "[info] " << msg << "\n"; }

template <typename... Args>
std::string cat(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

}  // namespace aef
