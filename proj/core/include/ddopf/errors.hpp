#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ddopf {

// Root of every error raised by the library. Callers that only need to
// report failures can catch this; the subclasses let the CLI map error
// classes onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConnectivityError : public Error {
 public:
  ConnectivityError(const std::string& what,
                    std::vector<std::vector<int>> components)
      : Error(what), components_(std::move(components)) {}

  // Bus ids of each connected component.
  const std::vector<std::vector<int>>& components() const {
    return components_;
  }

 private:
  std::vector<std::vector<int>> components_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class MissingField : public Error {
 public:
  using Error::Error;
};

class UnsupportedCost : public Error {
 public:
  using Error::Error;
};

class ReferenceError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::string field)
      : Error(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class PersistencyError : public Error {
 public:
  using Error::Error;
};

class InfeasibleForecast : public Error {
 public:
  InfeasibleForecast(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class InfeasibleSchedule : public Error {
 public:
  InfeasibleSchedule(const std::string& what, std::vector<int> rows,
                     int step = -1)
      : Error(what), rows_(std::move(rows)), step_(step) {}

  // Constraint rows flagged by the infeasibility certificate.
  const std::vector<int>& violated_rows() const { return rows_; }
  // Closed-loop step index, or -1 when raised outside a simulation.
  int step() const { return step_; }

 private:
  std::vector<int> rows_;
  int step_;
};

}  // namespace ddopf
