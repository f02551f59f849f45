#pragma once

#include <stdexcept>
#include <string>

namespace collab {

// Caller broke a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Completion text did not follow the response template.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TransportError : public std::runtime_error {
 public:
  TransportError(const std::string& what, int status = 0)
      : std::runtime_error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class FixtureMissError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Agent exhausted its format retries; the run cannot continue.
class RunAbort : public std::runtime_error {
 public:
  RunAbort(const std::string& what, int period, int agent)
      : std::runtime_error(what), period_(period), agent_(agent) {}
  int period() const noexcept { return period_; }
  int agent() const noexcept { return agent_; }

 private:
  int period_;
  int agent_;
};

}  // namespace collab
