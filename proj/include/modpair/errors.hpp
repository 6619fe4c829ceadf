#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace modpair {

/// Malformed program text. `offset` is the byte position the parser was
/// looking at when it gave up.
struct SyntaxError : std::runtime_error {
  std::size_t offset;
  SyntaxError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at offset " + std::to_string(offset) + ")"),
        offset(offset) {}
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A program string argument that the world's lexicon cannot ground.
struct UnresolvableArg : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct KindMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DanglingPairError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SplitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SplitMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LengthMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MissingNode : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace modpair
