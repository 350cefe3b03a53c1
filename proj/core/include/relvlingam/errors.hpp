#pragma once

#include <stdexcept>
#include <string>

namespace relv {

// Base for all typed library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidArgument : public Error {
public:
  using Error::Error;
};

// A parameter set or path matrix that does not describe a valid model,
// e.g. singular (I - Lambda).
class InvalidModel : public Error {
public:
  using Error::Error;
};

// Data that cannot be processed, e.g. a zero-variance column.
class DegenerateData : public Error {
public:
  using Error::Error;
};

class NumericError : public Error {
public:
  using Error::Error;
};

// Column swap requested for a latent that is not swappable with the node.
class InvalidSwap : public Error {
public:
  using Error::Error;
};

// A pairwise effect estimation step could not produce usable candidates
// (e.g. complex polynomial roots beyond tolerance).
class EstimationFailure : public Error {
public:
  using Error::Error;
};

// Effect values too close together for the power-matrix solve.
class IllConditioned : public Error {
public:
  using Error::Error;
};

// The linear system for the source cumulants does not have full column
// rank, so the latent cumulants cannot be recovered.
class Underdetermined : public Error {
public:
  Underdetermined(const std::string& msg, int iteration)
      : Error(msg), iteration(iteration) {}
  int iteration;
};

// No admissible source could be determined.
class DiscoveryFailure : public Error {
public:
  using Error::Error;
};

// Latent alignment produced groups inconsistent with the pairwise counts.
class InconsistentAlignment : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace relv
