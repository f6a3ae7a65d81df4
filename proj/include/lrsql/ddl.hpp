#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "lrsql/schema.hpp"

namespace lrsql {

struct DdlParseResult {
  DatabaseSchema schema;
  // One entry per skipped statement (indexes, inserts, views, ...).
  std::vector<std::string> warnings;
};

// Parses CREATE TABLE statements with column types, inline or table-level
// PRIMARY KEY, and FOREIGN KEY / REFERENCES clauses. Throws ParseError with
// line and column on malformed input and ValidationError on dangling keys.
DdlParseResult parse_ddl(std::string_view text, std::string db_id = "main");

// Emits the schema as DDL in the subset parse_ddl accepts.
std::string schema_to_ddl(const DatabaseSchema& schema);

}  // namespace lrsql
