#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace lrsql {

struct ColumnDef {
  std::string name;
  std::string type_name;
  bool is_primary_key = false;

  bool operator==(const ColumnDef&) const = default;
};

struct ForeignKey {
  std::string from_table;
  std::string from_column;
  std::string to_table;
  std::string to_column;

  bool operator==(const ForeignKey&) const = default;
};

struct TableDef {
  std::string name;
  std::vector<ColumnDef> columns;
  // Only keys whose from_table is this table.
  std::vector<ForeignKey> foreign_keys;

  bool operator==(const TableDef&) const = default;
};

// Tables keep their ingestion order. Names compare case-insensitively but are
// stored as written.
struct DatabaseSchema {
  std::string db_id;
  std::vector<TableDef> tables;

  bool operator==(const DatabaseSchema&) const = default;
};

struct CorrelationGroup {
  std::size_t group_id = 0;
  std::vector<std::string> member_tables;

  bool operator==(const CorrelationGroup&) const = default;
};

// The foreign-key split of a schema: connected groups of related tables plus
// the tables that take part in no foreign key at all.
struct GroupPartition {
  std::vector<CorrelationGroup> reference_groups;
  std::vector<std::string> no_reference_tables;

  bool operator==(const GroupPartition&) const = default;
};

const TableDef* find_table(const DatabaseSchema& schema, std::string_view name);
const ColumnDef* find_column(const TableDef& table, std::string_view name);

// Lists every invariant violation; empty when the schema is well formed.
std::vector<std::string> schema_issues(const DatabaseSchema& schema);

// Throws ValidationError carrying every issue.
void validate_schema(const DatabaseSchema& schema);

// Accepts the native schema JSON or a Spider tables.json entry. When the
// document is an array of Spider entries, `db_id` selects one (or the array
// must hold exactly one entry).
DatabaseSchema schema_from_json(const nlohmann::json& doc,
                                const std::optional<std::string>& db_id = std::nullopt);
DatabaseSchema load_schema_json(const std::filesystem::path& path,
                                const std::optional<std::string>& db_id = std::nullopt);

nlohmann::ordered_json schema_to_json(const DatabaseSchema& schema);

GroupPartition group_by_foreign_keys(const DatabaseSchema& schema);

// "table <name>", then "  <column> <type> [PK]" per column, then
// "  FK <column> → <table>.<column>" per foreign key.
std::string render_table(const TableDef& table);

}  // namespace lrsql
