#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vbi {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A request that cannot be satisfied by any size class, table, or pool.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class EncodingError : public Error {
 public:
  using Error::Error;
};

// Violation of the VB lifecycle (enable/attach/detach/disable/clone/promote).
class LifecycleError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class OutOfMemory : public Error {
 public:
  using Error::Error;
};

enum class FaultCode { index_range, invalid_entry, perm, bounds };

const char* fault_name(FaultCode code);

// Raised by the permission check on a memory access. Not fatal to a run.
class ProtectionFault : public Error {
 public:
  ProtectionFault(FaultCode code, const std::string& what) : Error(what), code_(code) {}
  FaultCode code() const { return code_; }

 private:
  FaultCode code_;
};

}  // namespace vbi
