#pragma once

#include <stdexcept>
#include <string>

namespace ragscope {

// Lookup of an id (task, model, metric, session) that does not exist.
class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Request is well-formed but cannot be answered with the data at hand,
// e.g. too few shared instances for a comparison.
class Unprocessable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ragscope
