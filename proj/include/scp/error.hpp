#pragma once

#include <stdexcept>
#include <string>

namespace scp {

// Each category maps onto one scp_status code and one CLI exit code.
enum class ErrorKind {
  argument,
  io,
  format,
  config,
  corrupt_stream,
  computation,
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace scp
