#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lrsql/random.hpp"
#include "lrsql/schema.hpp"
#include "lrsql/sft.hpp"

namespace lrsql::testing {

namespace fs = std::filesystem;

inline fs::path make_temp_dir(const std::string& tag) {
  std::string pattern = (fs::temp_directory_path() / ("lrsql-" + tag + "-XXXXXX")).string();
  std::vector<char> buf(pattern.begin(), pattern.end());
  buf.push_back('\0');
  if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
  return fs::path(buf.data());
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) : path(make_temp_dir(tag)) {}
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  fs::path operator/(const std::string& name) const { return path / name; }
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

inline ColumnDef col(std::string name, std::string type, bool pk = false) {
  return ColumnDef{std::move(name), std::move(type), pk};
}

// Random schema: up to max_tables tables named t0.., each with an id key, a
// few payload columns and random foreign keys (self references included).
inline DatabaseSchema random_schema(SeededRng& rng, std::size_t max_tables = 12, double fk_density = 0.15) {
  static const char* kTypes[] = {"INTEGER", "TEXT", "REAL", "VARCHAR(20)", "DATE"};
  DatabaseSchema schema;
  schema.db_id = "rand";
  const std::size_t n = 1 + rng.below(max_tables);
  for (std::size_t i = 0; i < n; ++i) {
    TableDef t;
    t.name = "t" + std::to_string(i);
    t.columns.push_back(col("id", "INTEGER", true));
    const std::size_t payload = rng.below(5);
    for (std::size_t c = 0; c < payload; ++c) {
      t.columns.push_back(col("c" + std::to_string(c), kTypes[rng.below(5)]));
    }
    schema.tables.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (rng.unit() >= fk_density) continue;
      auto& t = schema.tables[i];
      const std::string from = "ref_" + schema.tables[j].name + "_" + std::to_string(t.foreign_keys.size());
      t.columns.push_back(col(from, "INTEGER"));
      t.foreign_keys.push_back(ForeignKey{t.name, from, schema.tables[j].name, "id"});
    }
  }
  return schema;
}

// A fixed 30-table schema: a few FK clusters of different sizes plus loose
// tables, with column counts that vary so renderings differ in length.
inline DatabaseSchema thirty_table_schema() {
  DatabaseSchema schema;
  schema.db_id = "warehouse";
  const std::vector<std::vector<std::size_t>> clusters = {{0, 1, 2, 3, 4, 5}, {6, 7, 8}, {9, 10}, {11, 12, 13, 14},
                                                          {15, 16}};
  for (std::size_t i = 0; i < 30; ++i) {
    TableDef t;
    t.name = "tbl" + std::to_string(i);
    t.columns.push_back(col("id", "INTEGER", true));
    for (std::size_t c = 0; c < 2 + (i * 7) % 6; ++c) {
      t.columns.push_back(col("field_" + std::to_string(c), c % 2 ? "TEXT" : "REAL"));
    }
    schema.tables.push_back(std::move(t));
  }
  for (const auto& cluster : clusters) {
    for (std::size_t k = 1; k < cluster.size(); ++k) {
      auto& t = schema.tables[cluster[k]];
      const auto& target = schema.tables[cluster[k - 1]];
      const std::string from = target.name + "_id";
      t.columns.push_back(col(from, "INTEGER"));
      t.foreign_keys.push_back(ForeignKey{t.name, from, target.name, "id"});
    }
  }
  return schema;
}

// Seeded QA examples with 1..max_gold distinct gold tables each.
inline std::vector<QAExample> random_questions(SeededRng& rng, const DatabaseSchema& schema, std::size_t n,
                                               std::size_t max_gold = 3, const std::string& prefix = "q") {
  std::vector<QAExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> idx(schema.tables.size());
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    rng.shuffle(idx);
    const std::size_t g = 1 + rng.below(std::min(max_gold, idx.size()));
    QAExample ex;
    ex.question_id = prefix + std::to_string(i);
    ex.db_id = schema.db_id;
    ex.question = "Which rows matter for question " + std::to_string(i) + "?";
    for (std::size_t k = 0; k < g; ++k) ex.gold_tables.push_back(schema.tables[idx[k]].name);
    ex.gold_sql = "SELECT * FROM " + ex.gold_tables.front();
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace lrsql::testing
