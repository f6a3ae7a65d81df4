#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "lrsql/backend.hpp"
#include "lrsql/inference.hpp"
#include "lrsql/schema.hpp"
#include "lrsql/sft.hpp"
#include "lrsql/tokens.hpp"

namespace lrsql {

// Everything one pipeline run needs. Loaded from a JSON file; command-line
// flags override individual fields afterwards.
struct PipelineConfig {
  std::optional<std::filesystem::path> schema_path;  // .json (native or Spider) or .sql DDL
  std::optional<std::string> schema_db_id;
  std::optional<std::filesystem::path> qa_path;

  std::optional<std::size_t> max_token;
  std::optional<std::size_t> model_token;
  std::size_t margin = 0;
  std::optional<std::size_t> slice_token;
  std::optional<std::size_t> inference_slice_token;

  CounterKind counter = CounterKind::HeuristicWords;
  std::optional<std::filesystem::path> token_table_path;

  CompileMode mode = CompileMode::CotInjection;
  TemplateDialect dialect = TemplateDialect::GenericChatJsonl;
  std::size_t noise_tables = 2;
  std::optional<std::filesystem::path> predicted_tables_path;
  bool allow_oversize = false;

  BackendSpec backend;
  RetryPolicy retry;
  bool generate_sql = true;
  bool record_latency = false;
  std::optional<std::filesystem::path> slices_path;

  std::optional<std::filesystem::path> db_dir;
  std::chrono::milliseconds query_timeout{30'000};

  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
};

// Relative paths in the file resolve against the file's directory.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);

// Echo of the settings that shape results, for reports.
nlohmann::ordered_json config_echo(const PipelineConfig& config);

// An explicit slice_token wins over max_token/model_token/margin.
TokenBudget training_budget(const PipelineConfig& config);
TokenBudget inference_budget(const PipelineConfig& config);
TokenCounterSpec token_counter(const PipelineConfig& config);
DatabaseSchema load_configured_schema(const PipelineConfig& config, std::vector<std::string>* warnings = nullptr);

}  // namespace lrsql
