#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace zeroone {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An index (or a gap-function iterate) exceeded its configured cap.
class IndexOverflow : public Error {
 public:
  using Error::Error;
};

/// The requested evaluation path is not supported by the event family.
class CapabilityMissing : public Error {
 public:
  using Error::Error;
};

/// A bounded search ran out of budget before finding a witness.
class BudgetExhausted : public Error {
 public:
  using Error::Error;
};

/// User-supplied moduli violate their declared properties.
class ModuliInvalid : public Error {
 public:
  using Error::Error;
};

/// A ratio with vanishing denominator was requested.
class ZeroMass : public Error {
 public:
  using Error::Error;
};

/// Malformed descriptor or parameter outside its documented domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A sampler threw while evaluating one Monte Carlo draw.
class SamplerFailure : public Error {
 public:
  SamplerFailure(std::uint64_t sample_index, const std::string& what)
      : Error("sampler failed at sample " + std::to_string(sample_index) + ": " + what),
        sample_index_(sample_index) {}

  std::uint64_t sample_index() const noexcept { return sample_index_; }

 private:
  std::uint64_t sample_index_;
};

/// Configuration error, carrying the dotted path of the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace zeroone
