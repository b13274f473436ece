#pragma once

#include <stdexcept>
#include <string>

namespace ntlab {

/// Tensor shapes that do not line up for an operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke an operation's precondition (non-scalar loss, nil gate label, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid hyperparameter, scenario or variant/batch combination.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Value outside the domain of a function (label index >= K, empty test set, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Finite-difference oracle could not be evaluated.
class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ntlab
