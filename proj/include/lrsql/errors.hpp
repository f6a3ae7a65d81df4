#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lrsql {

// Errors are grouped by what the CLI reports back: bad input data versus a
// failing model backend.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, int line = 0, int column = 0);

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

// Carries every problem found, not just the first.
class ValidationError : public DataError {
 public:
  explicit ValidationError(std::vector<std::string> issues);

  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

class BudgetError : public DataError {
 public:
  using DataError::DataError;
};

class UncountedTextError : public DataError {
 public:
  using DataError::DataError;
};

class OversizeTableError : public DataError {
 public:
  OversizeTableError(std::string table, std::size_t tokens, std::size_t slice_token);

  const std::string& table() const { return table_; }

 private:
  std::string table_;
};

class CompileError : public DataError {
 public:
  using DataError::DataError;
};

class JoinError : public DataError {
 public:
  explicit JoinError(std::vector<std::string> ids);

  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

}  // namespace lrsql
