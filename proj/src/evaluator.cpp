#include "lrsql/evaluator.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "lrsql/errors.hpp"
#include "lrsql/text.hpp"

namespace lrsql {

namespace {

std::set<std::string> lowered_set(const std::vector<std::string>& names) {
  std::set<std::string> out;
  for (const auto& n : names) out.insert(text::to_lower(n));
  return out;
}

// Skips a quoted run starting at `i` (which holds the opening quote); returns
// the index just past the closing quote. Doubled quotes are escapes.
std::size_t skip_quoted(std::string_view sql, std::size_t i) {
  const char q = sql[i];
  ++i;
  while (i < sql.size()) {
    if (sql[i] == q) {
      if (i + 1 < sql.size() && sql[i + 1] == q) {
        i += 2;
        continue;
      }
      return i + 1;
    }
    ++i;
  }
  return i;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

struct Connection {
  sqlite3* db = nullptr;
  ~Connection() {
    if (db) sqlite3_close_v2(db);
  }
};

struct Statement {
  sqlite3_stmt* stmt = nullptr;
  ~Statement() {
    if (stmt) sqlite3_finalize(stmt);
  }
};

struct Deadline {
  std::chrono::steady_clock::time_point at;
};

int progress_check(void* arg) {
  const auto* deadline = static_cast<const Deadline*>(arg);
  return std::chrono::steady_clock::now() > deadline->at ? 1 : 0;
}

std::string format_number(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::fabs(v) < 1e15) {
    return "n:" + std::to_string(static_cast<long long>(v));
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "n:%.17g", v);
  return buf;
}

std::string cell(sqlite3_stmt* stmt, int col) {
  switch (sqlite3_column_type(stmt, col)) {
    case SQLITE_INTEGER:
      return "n:" + std::to_string(sqlite3_column_int64(stmt, col));
    case SQLITE_FLOAT:
      return format_number(sqlite3_column_double(stmt, col));
    case SQLITE_TEXT: {
      const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt, col));
      return "s:" + std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt, col)));
    }
    case SQLITE_BLOB: {
      static constexpr char kHex[] = "0123456789abcdef";
      const auto* p = static_cast<const unsigned char*>(sqlite3_column_blob(stmt, col));
      std::string out = "b:";
      for (int i = 0; i < sqlite3_column_bytes(stmt, col); ++i) {
        out += kHex[p[i] >> 4];
        out += kHex[p[i] & 0x0F];
      }
      return out;
    }
    default:
      return "null";
  }
}

using Rows = std::vector<std::vector<std::string>>;

struct QueryResult {
  Rows rows;
  std::optional<std::string> error;
};

QueryResult run_query(sqlite3* db, std::string_view sql, std::chrono::milliseconds timeout) {
  Deadline deadline{std::chrono::steady_clock::now() + timeout};
  sqlite3_progress_handler(db, 1000, progress_check, &deadline);
  QueryResult result;
  Statement st;
  const int rc = sqlite3_prepare_v2(db, sql.data(), static_cast<int>(sql.size()), &st.stmt, nullptr);
  if (rc != SQLITE_OK || !st.stmt) {
    result.error = rc != SQLITE_OK ? sqlite3_errmsg(db) : "empty statement";
    sqlite3_progress_handler(db, 0, nullptr, nullptr);
    return result;
  }
  const int ncol = sqlite3_column_count(st.stmt);
  while (true) {
    const int step = sqlite3_step(st.stmt);
    if (step == SQLITE_ROW) {
      std::vector<std::string> row;
      row.reserve(static_cast<std::size_t>(ncol));
      for (int c = 0; c < ncol; ++c) row.push_back(cell(st.stmt, c));
      result.rows.push_back(std::move(row));
    } else if (step == SQLITE_DONE) {
      break;
    } else {
      result.error = step == SQLITE_INTERRUPT ? "query timed out" : sqlite3_errmsg(db);
      break;
    }
  }
  sqlite3_progress_handler(db, 0, nullptr, nullptr);
  return result;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

TableMetrics table_metrics(const std::vector<TableSetPair>& predictions) {
  if (predictions.empty()) throw DataError("table metrics need at least one prediction");
  TableMetrics m;
  m.n_questions = predictions.size();
  double total = 0, filtered = 0, precision = 0, recall = 0;
  for (const auto& pair : predictions) {
    const auto pred = lowered_set(pair.predicted);
    const auto gold = lowered_set(pair.gold);
    std::size_t hit = 0;
    for (const auto& p : pred) hit += gold.count(p);
    total += pred == gold ? 1 : 0;
    filtered += hit == gold.size() ? 1 : 0;
    if (pred.empty()) {
      precision += gold.empty() ? 1.0 : 0.0;
    } else {
      precision += static_cast<double>(hit) / static_cast<double>(pred.size());
    }
    recall += gold.empty() ? 1.0 : static_cast<double>(hit) / static_cast<double>(gold.size());
  }
  const auto n = static_cast<double>(predictions.size());
  m.total_accuracy = total / n;
  m.filtered_accuracy = filtered / n;
  m.average_precision = precision / n;
  m.average_recall = recall / n;
  return m;
}

std::string normalize_sql(std::string_view sql) {
  std::string out;
  bool pending_space = false;
  std::size_t i = 0;
  while (i < sql.size()) {
    const char c = sql[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = true;
      ++i;
      continue;
    }
    if (pending_space && !out.empty()) out += ' ';
    pending_space = false;
    if (c == '\'' || c == '"') {
      const std::size_t end = skip_quoted(sql, i);
      // Literal body without its quotes, with doubled-quote escapes undone.
      std::string body;
      for (std::size_t k = i + 1; k < end && k < sql.size(); ++k) {
        if (sql[k] == c) {
          if (k + 1 < end && sql[k + 1] == c) {
            body += c;
            ++k;
            continue;
          }
          break;
        }
        body += sql[k];
      }
      out += '\'';
      for (char b : body) {
        if (b == '\'') out += '\'';
        out += b;
      }
      out += '\'';
      i = end;
      continue;
    }
    if (c == '`') {
      const std::size_t end = skip_quoted(sql, i);
      out.append(sql.substr(i, end - i));
      i = end;
      continue;
    }
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    ++i;
  }
  while (!out.empty() && (out.back() == ';' || out.back() == ' ')) out.pop_back();
  return out;
}

bool exact_match(std::string_view pred_sql, std::string_view gold_sql) {
  return normalize_sql(pred_sql) == normalize_sql(gold_sql);
}

bool has_top_level_order_by(std::string_view sql) {
  int depth = 0;
  bool saw_order = false;
  std::size_t i = 0;
  while (i < sql.size()) {
    const char c = sql[i];
    if (c == '\'' || c == '"' || c == '`') {
      i = skip_quoted(sql, i);
      saw_order = false;
      continue;
    }
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (is_word_char(c)) {
      std::size_t j = i;
      while (j < sql.size() && is_word_char(sql[j])) ++j;
      const std::string_view word = sql.substr(i, j - i);
      if (depth == 0 && saw_order && text::iequals(word, "by")) return true;
      saw_order = depth == 0 && text::iequals(word, "order");
      i = j;
      continue;
    }
    if (!std::isspace(static_cast<unsigned char>(c))) saw_order = false;
    ++i;
  }
  return false;
}

ExecutionVerdict execution_accuracy(std::string_view pred_sql, std::string_view gold_sql,
                                    const std::filesystem::path& db_path, std::chrono::milliseconds timeout) {
  if (!std::filesystem::is_regular_file(db_path)) {
    throw DataError("database file '" + db_path.string() + "' is not readable");
  }
  Connection conn;
  if (sqlite3_open_v2(db_path.c_str(), &conn.db, SQLITE_OPEN_READONLY | SQLITE_OPEN_NOMUTEX, nullptr) != SQLITE_OK) {
    throw DataError("cannot open database '" + db_path.string() + "': " +
                    (conn.db ? sqlite3_errmsg(conn.db) : "out of memory"));
  }
  if (auto probe = run_query(conn.db, "SELECT count(*) FROM sqlite_master", timeout); probe.error) {
    throw DataError("cannot read database '" + db_path.string() + "': " + *probe.error);
  }

  const QueryResult gold = run_query(conn.db, gold_sql, timeout);
  if (gold.error) throw DataError("gold SQL failed on '" + db_path.string() + "': " + *gold.error);

  ExecutionVerdict verdict;
  verdict.ordered = has_top_level_order_by(gold_sql);
  QueryResult pred = run_query(conn.db, pred_sql, timeout);
  if (pred.error) {
    verdict.pred_error = pred.error;
    return verdict;
  }
  Rows expected = gold.rows;
  if (!verdict.ordered) {
    std::sort(expected.begin(), expected.end());
    std::sort(pred.rows.begin(), pred.rows.end());
  }
  verdict.match = expected == pred.rows;
  return verdict;
}

std::filesystem::path locate_database(const std::filesystem::path& dir, const std::string& db_id) {
  const auto nested = dir / db_id / (db_id + ".sqlite");
  if (std::filesystem::exists(nested)) return nested;
  const auto flat = dir / (db_id + ".sqlite");
  if (std::filesystem::exists(flat)) return flat;
  throw DataError("no database file for '" + db_id + "' under '" + dir.string() + "'");
}

MetricsReport build_report(const ReportInputs& inputs) {
  std::map<std::string, const QAExample*> gold;
  std::vector<std::string> problems;
  for (const auto& ex : inputs.gold) {
    if (!gold.emplace(ex.question_id, &ex).second) problems.push_back(ex.question_id + " (duplicated in gold)");
  }

  std::map<std::string, const TablePrediction*> tables;
  for (const auto& p : inputs.table_predictions) {
    if (!tables.emplace(p.question_id, &p).second) {
      problems.push_back(p.question_id + " (duplicated in table predictions)");
    }
    if (!gold.count(p.question_id)) problems.push_back(p.question_id + " (missing from gold)");
  }
  for (const auto& ex : inputs.gold) {
    if (!tables.count(ex.question_id)) problems.push_back(ex.question_id + " (missing from table predictions)");
  }
  std::map<std::string, const SqlPrediction*> sqls;
  if (inputs.sql_predictions) {
    for (const auto& p : *inputs.sql_predictions) {
      if (!sqls.emplace(p.question_id, &p).second) problems.push_back(p.question_id + " (duplicated in SQL predictions)");
      if (!gold.count(p.question_id)) problems.push_back(p.question_id + " (missing from gold)");
    }
    for (const auto& ex : inputs.gold) {
      if (!sqls.count(ex.question_id)) problems.push_back(ex.question_id + " (missing from SQL predictions)");
    }
  }
  if (!problems.empty()) throw JoinError(std::move(problems));

  MetricsReport report;
  report.config = inputs.config;

  std::vector<TableSetPair> pairs;
  std::size_t slice_calls = 0;
  double latency_total = 0;
  bool any_latency = false;
  for (const auto& ex : inputs.gold) {
    const TablePrediction& p = *tables.at(ex.question_id);
    pairs.push_back(TableSetPair{p.predicted_tables, ex.gold_tables});
    slice_calls += p.per_slice.size();
    for (const auto& o : p.per_slice) {
      latency_total += static_cast<double>(o.latency.count());
      any_latency = any_latency || o.latency.count() > 0;
    }
  }
  report.table_metrics = table_metrics(pairs);
  report.mean_slice_calls = static_cast<double>(slice_calls) / static_cast<double>(inputs.gold.size());
  if (any_latency) report.mean_latency_ms = latency_total / static_cast<double>(inputs.gold.size());

  if (inputs.sql_predictions) {
    SqlMetrics sql;
    std::size_t em = 0, ex_hits = 0;
    for (const auto& ex : inputs.gold) {
      const SqlPrediction& p = *sqls.at(ex.question_id);
      SqlVerdict v;
      v.question_id = ex.question_id;
      if (p.failed) {
        v.error = p.error.empty() ? "generation failed" : p.error;
        if (inputs.db_dir) v.execution_match = false;
      } else {
        v.exact_match = exact_match(p.predicted_sql, ex.gold_sql);
        if (inputs.db_dir) {
          const auto verdict = execution_accuracy(p.predicted_sql, ex.gold_sql,
                                                  locate_database(*inputs.db_dir, ex.db_id), inputs.query_timeout);
          v.execution_match = verdict.match;
          if (verdict.pred_error) v.error = *verdict.pred_error;
        }
      }
      em += v.exact_match ? 1 : 0;
      ex_hits += v.execution_match.value_or(false) ? 1 : 0;
      sql.verdicts.push_back(std::move(v));
    }
    const auto n = static_cast<double>(inputs.gold.size());
    sql.exact_match = static_cast<double>(em) / n;
    if (inputs.db_dir) sql.execution_accuracy = static_cast<double>(ex_hits) / n;
    report.sql_metrics = std::move(sql);
  }
  return report;
}

nlohmann::ordered_json report_to_json(const MetricsReport& report) {
  nlohmann::ordered_json doc;
  doc["notes"] = {
      "average_precision and average_recall are macro averages over questions",
      "exact_match is normalized string equality, not component-level matching",
  };
  doc["config"] = report.config;
  const auto& t = report.table_metrics;
  doc["table_metrics"] = {
      {"n_questions", t.n_questions},
      {"total_accuracy", t.total_accuracy},
      {"filtered_accuracy", t.filtered_accuracy},
      {"average_precision", t.average_precision},
      {"average_recall", t.average_recall},
  };
  if (report.sql_metrics) {
    const auto& s = *report.sql_metrics;
    nlohmann::ordered_json verdicts = nlohmann::ordered_json::array();
    for (const auto& v : s.verdicts) {
      nlohmann::ordered_json item;
      item["question_id"] = v.question_id;
      item["exact_match"] = v.exact_match;
      if (v.execution_match) item["execution_match"] = *v.execution_match;
      if (v.error) item["error"] = *v.error;
      verdicts.push_back(std::move(item));
    }
    nlohmann::ordered_json sql;
    sql["exact_match"] = s.exact_match;
    sql["execution_accuracy"] = s.execution_accuracy ? nlohmann::ordered_json(*s.execution_accuracy) : nlohmann::ordered_json(nullptr);
    sql["verdicts"] = std::move(verdicts);
    doc["sql_metrics"] = std::move(sql);
  }
  nlohmann::ordered_json timing;
  timing["mean_slice_calls"] = report.mean_slice_calls;
  if (report.mean_latency_ms) timing["mean_latency_ms"] = *report.mean_latency_ms;
  doc["timing"] = std::move(timing);
  return doc;
}

std::string report_to_text(const MetricsReport& report) {
  std::vector<std::pair<std::string, std::string>> rows;
  const auto& t = report.table_metrics;
  rows.emplace_back("questions", std::to_string(t.n_questions));
  rows.emplace_back("total_accuracy", fixed4(t.total_accuracy));
  rows.emplace_back("filtered_accuracy", fixed4(t.filtered_accuracy));
  rows.emplace_back("average_precision", fixed4(t.average_precision));
  rows.emplace_back("average_recall", fixed4(t.average_recall));
  if (report.sql_metrics) {
    rows.emplace_back("exact_match", fixed4(report.sql_metrics->exact_match));
    rows.emplace_back("execution_accuracy", report.sql_metrics->execution_accuracy
                                                ? fixed4(*report.sql_metrics->execution_accuracy)
                                                : std::string("n/a"));
  }
  rows.emplace_back("mean_slice_calls", fixed4(report.mean_slice_calls));
  if (report.mean_latency_ms) rows.emplace_back("mean_latency_ms", fixed4(*report.mean_latency_ms));

  std::size_t width = 6;
  for (const auto& [k, v] : rows) width = std::max(width, k.size());
  std::ostringstream out;
  out << "metric" << std::string(width - 6 + 2, ' ') << "value\n";
  for (const auto& [k, v] : rows) out << k << std::string(width - k.size() + 2, ' ') << v << '\n';
  out << "(precision/recall: macro averages; exact_match: normalized string equality)\n";
  return out.str();
}

}  // namespace lrsql
