#include "lrsql/errors.hpp"

namespace lrsql {

namespace {

std::string join_lines(const std::vector<std::string>& items, const std::string& head) {
  std::string out = head;
  for (const auto& item : items) {
    out += "\n  - ";
    out += item;
  }
  return out;
}

std::string located(const std::string& what, int line, int column) {
  if (line <= 0) return what;
  return "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what;
}

}  // namespace

ParseError::ParseError(const std::string& what, int line, int column)
    : DataError(located(what, line, column)), line_(line), column_(column) {}

ValidationError::ValidationError(std::vector<std::string> issues)
    : DataError(join_lines(issues, "schema validation failed:")), issues_(std::move(issues)) {}

OversizeTableError::OversizeTableError(std::string table, std::size_t tokens,
                                       std::size_t slice_token)
    : DataError("table '" + table + "' renders to " + std::to_string(tokens) +
                " tokens, which does not fit under slice_token " + std::to_string(slice_token)),
      table_(std::move(table)) {}

JoinError::JoinError(std::vector<std::string> ids)
    : DataError(join_lines(ids, "question ids do not join across inputs:")), ids_(std::move(ids)) {}

}  // namespace lrsql
