#pragma once

#include <stdexcept>
#include <string>

namespace bvsharp {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// A domain or surface description that fails its validity checks.
class ConstructionError : public std::invalid_argument {
public:
  explicit ConstructionError(const std::string& what) : std::invalid_argument(what) {}
};

/// Input for which the requested quantity is undefined (e.g. a constant function).
class DegenerateInputError : public std::invalid_argument {
public:
  explicit DegenerateInputError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace bvsharp
