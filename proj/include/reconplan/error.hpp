#pragma once

#include <stdexcept>
#include <string>

namespace reconplan {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed input: schema violations, dangling references, bad arguments.
// `where` carries a row/field location such as "units row 4, field priority".
class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& what, std::string where = {})
      : Error(where.empty() ? what : where + ": " + what), where_(std::move(where)) {}

  const std::string& where() const noexcept { return where_; }

private:
  std::string where_;
};

class NotFoundError : public Error {
public:
  using Error::Error;
};

// Double-apply and concurrent-writer conflicts on a lineage.
class ConflictError : public Error {
public:
  using Error::Error;
};

// A caller broke an operation precondition (e.g. stepping with an infeasible action).
class ContractError : public Error {
public:
  using Error::Error;
};

// The dataset has no damaged items left.
class NothingToPlanError : public Error {
public:
  NothingToPlanError() : Error("nothing to plan: every item is intact") {}
};

}  // namespace reconplan
