#pragma once

#include <stdexcept>
#include <string>

namespace replay_td {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-contract input (bad file, bad config, bad dimensions
/// discovered at load time). Maps to CLI exit code 2.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// The induced chain failed the irreducibility/aperiodicity check.
class ChainNotErgodic : public Error {
 public:
  using Error::Error;
};

/// A dense linear solve hit a (numerically) singular system.
class SingularSystem : public Error {
 public:
  using Error::Error;
};

/// Power iteration did not converge within the iteration cap.
class NonConvergence : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// The mixing-time search exceeded its step cap; the chain is nearly
/// periodic or nearly reducible. Never silently truncated.
class MixingCapExceeded : public Error {
 public:
  using Error::Error;
};

class EmptyBuffer : public Error {
 public:
  using Error::Error;
};

class EmptyBatch : public Error {
 public:
  using Error::Error;
};

/// A theorem evaluator was called outside its hypothesis.
class HypothesisViolated : public Error {
 public:
  using Error::Error;
};

/// Final-iterate bounds require a stationary warm-up start.
class NonStationaryStart : public Error {
 public:
  using Error::Error;
};

class GenerationFailed : public Error {
 public:
  using Error::Error;
};

}  // namespace replay_td
