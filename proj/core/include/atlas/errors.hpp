#pragma once

#include <stdexcept>
#include <string>

namespace atlas {

// Base class for everything the pipeline can throw.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Session-log ingestion.
class MalformedLog : public Error {
 public:
  using Error::Error;
};
class DescriptorLengthMismatch : public Error {
 public:
  using Error::Error;
};
class NonMonotonicTimestamps : public Error {
 public:
  using Error::Error;
};

// Map serialization.
class UnsupportedVersion : public Error {
 public:
  using Error::Error;
};
class CorruptBlob : public Error {
 public:
  using Error::Error;
};
class IoFailure : public Error {
 public:
  using Error::Error;
};

// Keyframing.
class EmptyMission : public Error {
 public:
  using Error::Error;
};
class InvalidKeptSet : public Error {
 public:
  using Error::Error;
};

// Landmark quality.
class DanglingBacklink : public Error {
 public:
  using Error::Error;
};

// Descriptor projection / index.
class InsufficientSample : public Error {
 public:
  explicit InsufficientSample(const std::string& what, bool degenerate = false)
      : Error(what), degenerate_sample(degenerate) {}
  bool degenerate_sample;
};
class LengthMismatch : public Error {
 public:
  using Error::Error;
};
class EmptyInput : public Error {
 public:
  using Error::Error;
};
class IndexNotBuilt : public Error {
 public:
  using Error::Error;
};

// Geometric estimation.
class InsufficientCorrespondences : public Error {
 public:
  using Error::Error;
};
class NoConsensus : public Error {
 public:
  using Error::Error;
};
class DegenerateConfiguration : public Error {
 public:
  using Error::Error;
};
class BehindCamera : public Error {
 public:
  using Error::Error;
};

// Optimization.
class DisconnectedGraph : public Error {
 public:
  using Error::Error;
};
class SolverDiverged : public Error {
 public:
  using Error::Error;
};
class NoResiduals : public Error {
 public:
  using Error::Error;
};

// Synthetic world generation / evaluation.
class InvalidConfig : public Error {
 public:
  using Error::Error;
};
class CountMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace atlas
