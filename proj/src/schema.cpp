#include "lrsql/schema.hpp"

#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "lrsql/errors.hpp"
#include "lrsql/text.hpp"

namespace lrsql {

namespace {

using nlohmann::json;

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<unsigned> rank_;
};

std::optional<std::size_t> table_index(const DatabaseSchema& schema, std::string_view name) {
  for (std::size_t i = 0; i < schema.tables.size(); ++i) {
    if (text::iequals(schema.tables[i].name, name)) return i;
  }
  return std::nullopt;
}

const json& require(const json& obj, const char* key, const char* where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(std::string("missing field '") + key + "' in " + where);
  }
  return obj.at(key);
}

std::string require_string(const json& obj, const char* key, const char* where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) throw ParseError(std::string("field '") + key + "' in " + where + " must be a string");
  return v.get<std::string>();
}

DatabaseSchema native_from_json(const json& doc) {
  DatabaseSchema schema;
  schema.db_id = doc.value("db_id", std::string{});
  const json& tables = require(doc, "tables", "schema");
  if (!tables.is_array()) throw ParseError("'tables' must be an array");
  for (const json& t : tables) {
    TableDef table;
    table.name = require_string(t, "name", "table");
    const json& columns = require(t, "columns", "table");
    if (!columns.is_array()) throw ParseError("'columns' of table '" + table.name + "' must be an array");
    for (const json& c : columns) {
      ColumnDef col;
      col.name = require_string(c, "name", "column");
      col.type_name = c.value("type", std::string{});
      col.is_primary_key = c.value("pk", false);
      table.columns.push_back(std::move(col));
    }
    if (t.contains("foreign_keys")) {
      for (const json& fk : t.at("foreign_keys")) {
        table.foreign_keys.push_back(ForeignKey{
            table.name,
            require_string(fk, "from_column", "foreign key"),
            require_string(fk, "to_table", "foreign key"),
            require_string(fk, "to_column", "foreign key"),
        });
      }
    }
    schema.tables.push_back(std::move(table));
  }
  return schema;
}

DatabaseSchema spider_from_json(const json& entry) {
  DatabaseSchema schema;
  schema.db_id = entry.value("db_id", std::string{});
  const json& table_names = entry.contains("table_names_original")
                                ? entry.at("table_names_original")
                                : require(entry, "table_names", "spider entry");
  const json& column_names = entry.contains("column_names_original")
                                 ? entry.at("column_names_original")
                                 : require(entry, "column_names", "spider entry");
  const json empty = json::array();
  const json& column_types = entry.contains("column_types") ? entry.at("column_types") : empty;

  for (const json& name : table_names) {
    schema.tables.push_back(TableDef{name.get<std::string>(), {}, {}});
  }

  // Flat column index -> (table, column) position; index 0 is the "*" sentinel.
  std::vector<std::optional<std::pair<std::size_t, std::size_t>>> flat;
  std::vector<std::string> issues;
  for (std::size_t i = 0; i < column_names.size(); ++i) {
    const json& pair = column_names[i];
    const int t = pair.at(0).get<int>();
    if (t < 0) {
      flat.emplace_back(std::nullopt);
      continue;
    }
    if (static_cast<std::size_t>(t) >= schema.tables.size()) {
      issues.push_back("column index " + std::to_string(i) + " names missing table index " +
                       std::to_string(t));
      flat.emplace_back(std::nullopt);
      continue;
    }
    auto& table = schema.tables[static_cast<std::size_t>(t)];
    ColumnDef col;
    col.name = pair.at(1).get<std::string>();
    if (i < column_types.size()) col.type_name = column_types[i].get<std::string>();
    flat.emplace_back(std::make_pair(static_cast<std::size_t>(t), table.columns.size()));
    table.columns.push_back(std::move(col));
  }

  const auto resolve = [&](int idx) -> std::optional<std::pair<std::size_t, std::size_t>> {
    if (idx < 0 || static_cast<std::size_t>(idx) >= flat.size()) return std::nullopt;
    return flat[static_cast<std::size_t>(idx)];
  };

  if (entry.contains("primary_keys")) {
    for (const json& pk : entry.at("primary_keys")) {
      std::vector<int> idxs;
      if (pk.is_array()) {
        for (const json& k : pk) idxs.push_back(k.get<int>());
      } else {
        idxs.push_back(pk.get<int>());
      }
      for (int idx : idxs) {
        if (auto pos = resolve(idx)) {
          schema.tables[pos->first].columns[pos->second].is_primary_key = true;
        } else {
          issues.push_back("primary key column index " + std::to_string(idx) + " does not resolve");
        }
      }
    }
  }

  if (entry.contains("foreign_keys")) {
    for (const json& fk : entry.at("foreign_keys")) {
      const int from = fk.at(0).get<int>();
      const int to = fk.at(1).get<int>();
      if (from == 0 || to == 0) continue;
      const auto a = resolve(from);
      const auto b = resolve(to);
      if (!a || !b) {
        issues.push_back("foreign key [" + std::to_string(from) + ", " + std::to_string(to) +
                         "] does not resolve to columns");
        continue;
      }
      const auto& from_table = schema.tables[a->first];
      const auto& to_table = schema.tables[b->first];
      schema.tables[a->first].foreign_keys.push_back(
          ForeignKey{from_table.name, from_table.columns[a->second].name, to_table.name,
                     to_table.columns[b->second].name});
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return schema;
}

bool looks_like_spider(const json& doc) {
  return doc.is_object() && (doc.contains("table_names_original") || doc.contains("table_names") ||
                             doc.contains("column_names_original"));
}

}  // namespace

const TableDef* find_table(const DatabaseSchema& schema, std::string_view name) {
  auto idx = table_index(schema, name);
  return idx ? &schema.tables[*idx] : nullptr;
}

const ColumnDef* find_column(const TableDef& table, std::string_view name) {
  for (const auto& col : table.columns) {
    if (text::iequals(col.name, name)) return &col;
  }
  return nullptr;
}

std::vector<std::string> schema_issues(const DatabaseSchema& schema) {
  std::vector<std::string> issues;
  std::set<std::string> seen_tables;
  for (const auto& table : schema.tables) {
    if (table.name.empty()) {
      issues.push_back("table with empty name");
    } else if (!seen_tables.insert(text::to_lower(table.name)).second) {
      issues.push_back("duplicate table name '" + table.name + "'");
    }
    if (table.columns.empty()) issues.push_back("table '" + table.name + "' has no columns");
    std::set<std::string> seen_columns;
    for (const auto& col : table.columns) {
      if (col.name.empty()) {
        issues.push_back("table '" + table.name + "' has a column with empty name");
      } else if (!seen_columns.insert(text::to_lower(col.name)).second) {
        issues.push_back("duplicate column '" + col.name + "' in table '" + table.name + "'");
      }
    }
  }
  for (const auto& table : schema.tables) {
    for (const auto& fk : table.foreign_keys) {
      const std::string label = "foreign key " + fk.from_table + "." + fk.from_column + " -> " +
                                fk.to_table + "." + fk.to_column;
      if (!text::iequals(fk.from_table, table.name)) {
        issues.push_back(label + " is attached to table '" + table.name + "'");
      }
      if (!find_column(table, fk.from_column)) {
        issues.push_back(label + ": missing column '" + fk.from_column + "' in table '" + table.name + "'");
      }
      const TableDef* target = find_table(schema, fk.to_table);
      if (!target) {
        issues.push_back(label + ": missing table '" + fk.to_table + "'");
      } else if (!find_column(*target, fk.to_column)) {
        issues.push_back(label + ": missing column '" + fk.to_column + "' in table '" + fk.to_table + "'");
      }
    }
  }
  return issues;
}

void validate_schema(const DatabaseSchema& schema) {
  auto issues = schema_issues(schema);
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

DatabaseSchema schema_from_json(const json& doc, const std::optional<std::string>& db_id) {
  DatabaseSchema schema;
  if (doc.is_array()) {
    const json* chosen = nullptr;
    for (const json& entry : doc) {
      if (!db_id || entry.value("db_id", std::string{}) == *db_id) {
        if (chosen && !db_id) {
          throw ParseError("schema file holds several databases; select one by db_id");
        }
        chosen = &entry;
        if (db_id) break;
      }
    }
    if (!chosen) {
      throw ParseError(db_id ? "no database '" + *db_id + "' in schema file" : "schema file is an empty array");
    }
    schema = looks_like_spider(*chosen) ? spider_from_json(*chosen) : native_from_json(*chosen);
  } else if (looks_like_spider(doc)) {
    schema = spider_from_json(doc);
  } else if (doc.is_object()) {
    schema = native_from_json(doc);
  } else {
    throw ParseError("schema document must be an object or an array");
  }
  validate_schema(schema);
  return schema;
}

DatabaseSchema load_schema_json(const std::filesystem::path& path,
                                const std::optional<std::string>& db_id) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed JSON in '" + path.string() + "': " + e.what());
  }
  try {
    return schema_from_json(doc, db_id);
  } catch (const json::exception& e) {
    throw ParseError("unexpected JSON shape in '" + path.string() + "': " + e.what());
  }
}

nlohmann::ordered_json schema_to_json(const DatabaseSchema& schema) {
  nlohmann::ordered_json tables = nlohmann::ordered_json::array();
  for (const auto& table : schema.tables) {
    nlohmann::ordered_json columns = nlohmann::ordered_json::array();
    for (const auto& col : table.columns) {
      columns.push_back({{"name", col.name}, {"type", col.type_name}, {"pk", col.is_primary_key}});
    }
    nlohmann::ordered_json fks = nlohmann::ordered_json::array();
    for (const auto& fk : table.foreign_keys) {
      fks.push_back({{"from_column", fk.from_column}, {"to_table", fk.to_table}, {"to_column", fk.to_column}});
    }
    tables.push_back({{"name", table.name}, {"columns", columns}, {"foreign_keys", fks}});
  }
  return {{"db_id", schema.db_id}, {"tables", tables}};
}

GroupPartition group_by_foreign_keys(const DatabaseSchema& schema) {
  const std::size_t n = schema.tables.size();
  UnionFind uf(n);
  std::vector<bool> participates(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& fk : schema.tables[i].foreign_keys) {
      auto j = table_index(schema, fk.to_table);
      if (!j) continue;
      participates[i] = true;
      participates[*j] = true;
      uf.unite(i, *j);
    }
  }

  GroupPartition out;
  std::vector<std::optional<std::size_t>> group_of_root(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& name = schema.tables[i].name;
    if (!participates[i]) {
      out.no_reference_tables.push_back(name);
      continue;
    }
    auto& slot = group_of_root[uf.find(i)];
    if (!slot) {
      slot = out.reference_groups.size();
      out.reference_groups.push_back(CorrelationGroup{out.reference_groups.size(), {}});
    }
    out.reference_groups[*slot].member_tables.push_back(name);
  }
  return out;
}

std::string render_table(const TableDef& table) {
  std::ostringstream out;
  out << "table " << table.name;
  for (const auto& col : table.columns) {
    out << "\n  " << col.name;
    if (!col.type_name.empty()) out << ' ' << col.type_name;
    if (col.is_primary_key) out << " [PK]";
  }
  for (const auto& fk : table.foreign_keys) {
    out << "\n  FK " << fk.from_column << " → " << fk.to_table << '.' << fk.to_column;
  }
  return out.str();
}

}  // namespace lrsql
