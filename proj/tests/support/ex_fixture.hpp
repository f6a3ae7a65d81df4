#pragma once

#include <sqlite3.h>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace lrsql::testing {

// Three tables. t is inserted out of key order (3, 1, 2) so a plain scan and a
// sorted scan disagree; u holds a duplicate row.
inline void make_ex_database(const std::filesystem::path& path) {
  std::filesystem::remove(path);
  sqlite3* db = nullptr;
  if (sqlite3_open(path.c_str(), &db) != SQLITE_OK) throw std::runtime_error("cannot create fixture database");
  const char* script = R"(
    CREATE TABLE t (id INTEGER, name TEXT, score REAL);
    INSERT INTO t VALUES (3, 'c', 2.0), (1, 'a', 1.5), (2, 'b', 2.0);
    CREATE TABLE u (tid INTEGER, tag TEXT);
    INSERT INTO u VALUES (1, 'x'), (1, 'x'), (2, 'y');
    CREATE TABLE v (k TEXT, n INTEGER);
    INSERT INTO v VALUES ('p', 10), ('q', 20), ('r', 30);
  )";
  char* err = nullptr;
  const int rc = sqlite3_exec(db, script, nullptr, nullptr, &err);
  sqlite3_free(err);
  sqlite3_close(db);
  if (rc != SQLITE_OK) throw std::runtime_error("cannot populate fixture database");
}

struct ExCase {
  const char* label;
  const char* pred;
  const char* gold;
  bool match;
  bool pred_error;
};

// Verdicts worked out by listing both result sequences by hand.
inline const std::vector<ExCase>& ex_cases() {
  static const std::vector<ExCase> cases = {
      // [3,1,2] vs [3,1,2]
      {"identical query", "SELECT id FROM t", "SELECT id FROM t", true, false},
      // scan order [3,1,2] vs sorted [1,2,3]; gold is ordered
      {"gold ORDER BY, pred unordered", "SELECT id FROM t", "SELECT id FROM t ORDER BY id", false, false},
      // [1,2,3] vs {1,2,3}; gold unordered so multisets compare
      {"pred ORDER BY, gold unordered", "SELECT id FROM t ORDER BY id", "SELECT id FROM t", true, false},
      // [3,2,1] vs [1,2,3]
      {"reversed order", "SELECT id FROM t ORDER BY id DESC", "SELECT id FROM t ORDER BY id", false, false},
      // {1,1,2} vs {1,2}
      {"duplicate rows count", "SELECT tid FROM u", "SELECT DISTINCT tid FROM u", false, false},
      // {1,1} vs {1,1}
      {"same multiset, different query", "SELECT tid FROM u WHERE tag = 'x'", "SELECT tid FROM u WHERE tid = 1", true,
       false},
      {"syntax error", "SELEC id FROM t", "SELECT id FROM t", false, true},
      {"unknown table", "SELECT id FROM missing", "SELECT id FROM t", false, true},
      // [3] vs [3]
      {"aggregate vs literal", "SELECT count(*) FROM u", "SELECT 3", true, false},
      // REAL 2.0 vs INTEGER 2
      {"real and integer agree", "SELECT score FROM t WHERE id = 3", "SELECT 2", true, false},
      // (a,1),(b,2),(c,3) vs (1,a),(2,b),(3,c): columns are positional
      {"column order", "SELECT name, id FROM t", "SELECT id, name FROM t", false, false},
      // [p,q] vs [p,q], both ordered
      {"ordered match", "SELECT k FROM v WHERE n < 25 ORDER BY n", "SELECT k FROM v WHERE n <= 20 ORDER BY k", true,
       false},
  };
  return cases;
}

}  // namespace lrsql::testing
