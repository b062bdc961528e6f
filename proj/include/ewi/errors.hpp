#ifndef EWI_ERRORS_HPP
#define EWI_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ewi {

// Bad run configuration or malformed config file.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Missing or unreadable input data, unwritable outputs.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ewi

#endif  // EWI_ERRORS_HPP
