#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrsql/inference.hpp"
#include "lrsql/sft.hpp"

namespace lrsql {

struct TableSetPair {
  std::vector<std::string> predicted;
  std::vector<std::string> gold;
};

// Macro averages over questions. Precision of an empty prediction is 1 when
// gold is empty too and 0 otherwise; recall of an empty gold set is 1.
struct TableMetrics {
  double total_accuracy = 0;
  double filtered_accuracy = 0;
  double average_precision = 0;
  double average_recall = 0;
  std::size_t n_questions = 0;
};

// Names compare case-insensitively; duplicates within a set are ignored.
TableMetrics table_metrics(const std::vector<TableSetPair>& predictions);

// Normalised string equality: lowercase outside quoted literals, collapse
// whitespace, drop a trailing ";", quote literals with '.
bool exact_match(std::string_view pred_sql, std::string_view gold_sql);
std::string normalize_sql(std::string_view sql);

// True when the statement ends in an ORDER BY outside any parentheses.
bool has_top_level_order_by(std::string_view sql);

struct ExecutionVerdict {
  bool match = false;
  bool ordered = false;
  std::optional<std::string> pred_error;
};

// Runs both queries on a read-only connection. Result multisets must agree;
// row order matters only when gold has a top-level ORDER BY. A prediction
// that fails or times out is a non-match. Throws DataError for an unreadable
// database or a gold query that does not run.
ExecutionVerdict execution_accuracy(std::string_view pred_sql, std::string_view gold_sql,
                                    const std::filesystem::path& db,
                                    std::chrono::milliseconds timeout = std::chrono::seconds(30));

struct SqlVerdict {
  std::string question_id;
  bool exact_match = false;
  std::optional<bool> execution_match;  // absent when no database was given
  std::optional<std::string> error;
};

struct SqlMetrics {
  std::optional<double> execution_accuracy;
  double exact_match = 0;
  std::vector<SqlVerdict> verdicts;
};

struct MetricsReport {
  TableMetrics table_metrics;
  std::optional<SqlMetrics> sql_metrics;
  nlohmann::ordered_json config;
  double mean_slice_calls = 0;
  std::optional<double> mean_latency_ms;
};

struct ReportInputs {
  std::vector<TablePrediction> table_predictions;
  std::optional<std::vector<SqlPrediction>> sql_predictions;
  std::vector<QAExample> gold;
  std::optional<std::filesystem::path> db_dir;
  std::chrono::milliseconds query_timeout = std::chrono::seconds(30);
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
};

// Joins predictions with gold by question_id (JoinError on any mismatch) and
// computes both metric families. Execution accuracy needs db_dir.
MetricsReport build_report(const ReportInputs& inputs);

// Looks for <dir>/<db_id>/<db_id>.sqlite, then <dir>/<db_id>.sqlite.
std::filesystem::path locate_database(const std::filesystem::path& dir, const std::string& db_id);

nlohmann::ordered_json report_to_json(const MetricsReport& report);
std::string report_to_text(const MetricsReport& report);

}  // namespace lrsql
