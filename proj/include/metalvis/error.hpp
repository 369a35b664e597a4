#pragma once

#include <stdexcept>
#include <string>

namespace metalvis {

// Base for every failure raised by the library. Subsystems throw this
// directly; the message always names the offending input.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace metalvis
