#pragma once

#include <stdexcept>
#include <string>

namespace amore {

// Base of every error raised by the library. The CLI maps subclasses onto
// exit codes: ConfigError -> 2, everything else -> 1.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
  public:
    using Error::Error;
};

// QR / least squares on a rank-deficient basis.
class SingularBasisError : public Error {
  public:
    using Error::Error;
};

// Value outside the domain of a transform (log of a nonpositive value, ...).
class DomainError : public Error {
  public:
    using Error::Error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

class ContractViolation : public Error {
  public:
    using Error::Error;
};

class TrainingDivergedError : public Error {
  public:
    TrainingDivergedError(const std::string& what, int epoch)
        : Error(what), epoch_(epoch) {}
    int epoch() const noexcept { return epoch_; }

  private:
    int epoch_;
};

class RolloutDivergenceError : public Error {
  public:
    RolloutDivergenceError(const std::string& what, int segment)
        : Error(what), segment_(segment) {}
    int segment() const noexcept { return segment_; }

  private:
    int segment_;
};

class IntegrationError : public Error {
  public:
    IntegrationError(const std::string& what, long time_index)
        : Error(what), time_index_(time_index) {}
    long time_index() const noexcept { return time_index_; }

  private:
    long time_index_;
};

class SingularityError : public Error {
  public:
    using Error::Error;
};

class ValidationError : public Error {
  public:
    using Error::Error;
};

// A metric is undefined for the given reference, e.g. a zero-norm series.
class UndefinedMetricError : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

}  // namespace amore
