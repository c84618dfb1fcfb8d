#pragma once

#include <stdexcept>
#include <string>

namespace fetril {

/// Base of every error raised by the library. `module()` names the component
/// that detected the problem so front ends can attribute diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error("[" + module + "] " + what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

/// Malformed bytes or documents: bad magic, truncated payload, unparsable JSON.
class FormatError : public Error {
  using Error::Error;
};

/// Well-formed pieces that disagree with each other (dimension or count mismatch).
class ConsistencyError : public Error {
  using Error::Error;
};

/// Values that are syntactically fine but unusable, e.g. NaN features.
class DataError : public Error {
  using Error::Error;
};

/// A caller broke an operation's precondition.
class ContractError : public Error {
  using Error::Error;
};

/// The incremental process was driven into an impossible configuration.
class ProtocolError : public Error {
  using Error::Error;
};

/// Cosine geometry is undefined (zero-norm centroid).
class DegenerateGeometryError : public Error {
  using Error::Error;
};

class IoError : public Error {
  using Error::Error;
};

}  // namespace fetril
