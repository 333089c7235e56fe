#pragma once

#include <stdexcept>
#include <string>

namespace seqcast {

// Error categories map onto the CLI exit codes: config -> 2, data -> 3,
// numeric -> 4.
enum class ErrorKind { config, data, numeric };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  int exit_code() const {
    switch (kind_) {
    case ErrorKind::config: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::numeric: return 4;
    }
    return 1;
  }

private:
  ErrorKind kind_;
};

inline Error config_error(std::string msg) { return Error(ErrorKind::config, std::move(msg)); }
inline Error data_error(std::string msg) { return Error(ErrorKind::data, std::move(msg)); }
inline Error numeric_error(std::string msg) { return Error(ErrorKind::numeric, std::move(msg)); }

} // namespace seqcast
