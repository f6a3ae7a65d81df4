#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrsql/backend.hpp"
#include "lrsql/errors.hpp"
#include "lrsql/schema.hpp"
#include "lrsql/sft.hpp"
#include "lrsql/slicer.hpp"

namespace lrsql {

struct RetryPolicy {
  int retries = 2;
  std::chrono::milliseconds base_delay{200};  // doubles after every failed attempt
};

struct ParsedTables {
  std::vector<std::string> tables;
  std::vector<std::string> discarded;
};

// "#None#" (after trimming) yields nothing. Otherwise the text is split on
// commas and newlines and each token kept when it names a slice table,
// case-insensitively, in the slice's casing. Everything else is discarded.
ParsedTables parse_table_response(std::string_view raw, const std::vector<std::string>& slice_tables);

struct SliceOutcome {
  std::size_t slice_index = 0;
  std::string raw_response;
  std::vector<std::string> parsed;
  std::vector<std::string> discarded;
  std::chrono::milliseconds latency{0};
  int attempts = 0;
  bool failed = false;
  std::string error;
};

struct TablePrediction {
  std::string question_id;
  std::vector<std::string> predicted_tables;  // first-seen order, no duplicates
  std::vector<SliceOutcome> per_slice;
  std::optional<std::string> error;
};

struct SqlPrediction {
  std::string question_id;
  std::string predicted_sql;
  std::vector<std::string> context_tables;
  bool failed = false;
  std::string error;
};

// Raised when every slice of a question failed at the backend.
class QuestionFailedError : public BackendError {
 public:
  explicit QuestionFailedError(TablePrediction partial);

  const TablePrediction& partial() const { return partial_; }

 private:
  TablePrediction partial_;
};

// Calls the backend once per slice, in order. In cot_injection and
// cot_ablation the prompt carries the tables predicted so far.
TablePrediction predict_tables(std::string_view question_id, std::string_view question, const SliceSet& slices,
                               ChatBackend& backend, CompileMode mode, const RetryPolicy& retry = {});

// Strips code fences and keeps the first statement, without its ";".
std::string extract_sql(std::string_view raw);

SqlPrediction generate_sql(std::string_view question_id, std::string_view question,
                           const TablePrediction& predicted, const DatabaseSchema& schema, ChatBackend& backend,
                           const RetryPolicy& retry = {});

struct PipelineOptions {
  CompileMode mode = CompileMode::CotInjection;
  std::size_t max_in_flight = 1;
  bool generate_sql = true;
  RetryPolicy retry;
};

struct PipelineResult {
  TablePrediction tables;
  std::optional<SqlPrediction> sql;
};

// Questions run concurrently up to max_in_flight; results keep input order.
// A failing question is recorded and never aborts the batch.
std::vector<PipelineResult> run_pipeline(const std::vector<QAExample>& examples, const SliceSet& slices,
                                         const DatabaseSchema& schema, ChatBackend& table_backend,
                                         ChatBackend& sql_backend, const PipelineOptions& options);

nlohmann::ordered_json table_prediction_to_json(const TablePrediction& p, bool with_latency = false);
nlohmann::ordered_json sql_prediction_to_json(const SqlPrediction& p);
TablePrediction table_prediction_from_json(const nlohmann::json& row);
SqlPrediction sql_prediction_from_json(const nlohmann::json& row);

void write_table_predictions(const std::filesystem::path& path, const std::vector<PipelineResult>& results,
                             bool with_latency = false);
void write_sql_predictions(const std::filesystem::path& path, const std::vector<PipelineResult>& results);
std::vector<TablePrediction> load_table_predictions(const std::filesystem::path& path);
std::vector<SqlPrediction> load_sql_predictions(const std::filesystem::path& path);

}  // namespace lrsql
