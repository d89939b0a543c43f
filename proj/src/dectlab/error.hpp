#pragma once

#include <stdexcept>
#include <string>

namespace dectlab {

enum class Errc {
  invalid_argument = 1,
  out_of_range,
  shape_mismatch,
  io,
  parse,
  numeric,
};

/// Exception carrying an error category and the module that raised it.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& module, const std::string& message)
      : std::runtime_error(module + ": " + message), code_(code), module_(module) {}

  Errc code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }

 private:
  Errc code_;
  std::string module_;
};

}  // namespace dectlab
