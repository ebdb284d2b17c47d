#pragma once

#include <stdexcept>
#include <string>

namespace rumorlab {

// Request that cannot be satisfied at any cost (parameter combination or
// resource bound), as opposed to a malformed one. The CLI maps this to its
// own exit code.
struct InfeasibleError : std::runtime_error {
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

// A checked bound or certification failed. Distinct from InfeasibleError so
// verification failures keep their own exit code.
struct VerificationError : std::runtime_error {
  explicit VerificationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rumorlab
