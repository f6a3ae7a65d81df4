#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrsql/schema.hpp"
#include "lrsql/slicer.hpp"

namespace lrsql {

struct QAExample {
  std::string question_id;
  std::string db_id;
  std::string question;
  std::vector<std::string> gold_tables;
  std::string gold_sql;
};

std::vector<QAExample> load_qa_jsonl(const std::filesystem::path& path);
void write_qa_jsonl(const std::filesystem::path& path, const std::vector<QAExample>& examples);
nlohmann::ordered_json qa_to_json(const QAExample& example);

// Gold tables must be present and resolve; gold SQL must be non-empty.
std::vector<std::string> qa_issues(const QAExample& example, const DatabaseSchema& schema);

// cot_ablation trains exactly like no_cot and differs only at inference,
// where the already selected tables are still injected.
enum class CompileMode { CotInjection, NoCot, CotAblation };

std::string_view to_string(CompileMode mode);
CompileMode compile_mode_from_string(std::string_view name);

// Whether inference prompts carry the tables selected so far.
inline bool injects_selected_at_inference(CompileMode mode) { return mode != CompileMode::NoCot; }

inline constexpr std::string_view kNoneToken = "#None#";
inline constexpr std::string_view kNoSelectionYet = "(none yet)";
inline constexpr std::string_view kSchemaLinkSystemPrompt =
    "You are a database assistant. From the given tables, list the table names relevant to the question, "
    "or answer #None#.";
inline constexpr std::string_view kSqlGenerationSystemPrompt =
    "You are a database assistant. Write one SQL query that answers the question using the given tables.";

// Passing `selected` adds the "Known relevant tables" line.
std::string schema_link_user_prompt(std::string_view question, std::string_view slice_text,
                                    const std::vector<std::string>* selected);
std::string sql_generation_user_prompt(std::string_view question, const std::vector<std::string>& renderings);

struct SftMeta {
  std::string question_id;
  std::optional<std::size_t> slice_index;  // absent for SQL-generation records
  std::string mode;
  bool is_balancing_duplicate = false;

  bool operator==(const SftMeta&) const = default;
};

struct SftRecord {
  std::string system;
  std::string user;
  std::string assistant;
  SftMeta meta;

  bool operator==(const SftRecord&) const = default;
};

// One record per (example, slice). The assistant names the example's gold
// tables inside the slice, in slice order, or "#None#". In cot_injection each
// positive record is followed by a duplicate without the selected-tables line.
std::vector<SftRecord> compile_schema_link(const std::vector<QAExample>& examples, const SliceSet& slices,
                                           CompileMode mode);

struct SqlGenOptions {
  std::size_t noise_tables = 2;
  std::uint64_t seed = 0;
  // When set, context tables are these predictions unioned with gold instead
  // of random noise.
  std::optional<std::map<std::string, std::vector<std::string>>> predicted_tables;
};

struct SqlGenResult {
  std::vector<SftRecord> records;
  std::vector<std::string> warnings;
};

SqlGenResult compile_sql_generation(const std::vector<QAExample>& examples, const DatabaseSchema& schema,
                                    const SqlGenOptions& options);

// Tables a SQL-generation record shows for one example, in schema order.
std::vector<std::string> sql_context_tables(const QAExample& example, const DatabaseSchema& schema,
                                            const SqlGenOptions& options, std::vector<std::string>* warnings);

enum class TemplateDialect { GenericChatJsonl, RoleTaggedText };

std::string_view to_string(TemplateDialect dialect);
TemplateDialect template_dialect_from_string(std::string_view name);

// generic-chat-jsonl: {"messages":[system,user,assistant]} on one line.
// role-tagged-text: <system>...<user>...<assistance>...<endoftext>.
std::string render_template(std::string_view system, std::string_view user, std::string_view assistant,
                            TemplateDialect dialect);

// One JSONL line per record with the record's meta attached.
std::string sft_record_to_jsonl(const SftRecord& record, TemplateDialect dialect);
void write_sft_jsonl(const std::filesystem::path& path, const std::vector<SftRecord>& records,
                     TemplateDialect dialect);

struct DatasetSplit {
  std::vector<QAExample> train;
  std::vector<QAExample> validation;
};

// Seeded 9:1 split; each side keeps the input order.
DatasetSplit split_examples(const std::vector<QAExample>& examples, std::uint64_t seed);

}  // namespace lrsql
