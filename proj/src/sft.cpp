#include "lrsql/sft.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_map>

#include "lrsql/errors.hpp"
#include "lrsql/random.hpp"
#include "lrsql/text.hpp"

namespace lrsql {

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

std::vector<QAExample> load_qa_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open QA file '" + path.string() + "'");
  std::vector<QAExample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      const auto row = nlohmann::json::parse(line);
      QAExample ex;
      ex.question_id = row.at("question_id").is_string() ? row.at("question_id").get<std::string>()
                                                         : row.at("question_id").dump();
      ex.db_id = row.value("db_id", std::string{});
      ex.question = row.at("question").get<std::string>();
      ex.gold_tables = row.at("gold_tables").get<std::vector<std::string>>();
      ex.gold_sql = row.value("gold_sql", std::string{});
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno, 1);
    }
  }
  return out;
}

nlohmann::ordered_json qa_to_json(const QAExample& example) {
  nlohmann::ordered_json row;
  row["question_id"] = example.question_id;
  row["db_id"] = example.db_id;
  row["question"] = example.question;
  row["gold_tables"] = example.gold_tables;
  row["gold_sql"] = example.gold_sql;
  return row;
}

void write_qa_jsonl(const std::filesystem::path& path, const std::vector<QAExample>& examples) {
  auto out = open_for_write(path);
  for (const auto& ex : examples) out << qa_to_json(ex).dump() << '\n';
}

std::vector<std::string> qa_issues(const QAExample& example, const DatabaseSchema& schema) {
  std::vector<std::string> issues;
  const std::string who = "question " + example.question_id;
  if (example.gold_tables.empty()) issues.push_back(who + " has no gold tables");
  for (const auto& t : example.gold_tables) {
    if (!find_table(schema, t)) issues.push_back(who + ": gold table '" + t + "' is not in the schema");
  }
  if (text::trim(example.gold_sql).empty()) issues.push_back(who + " has empty gold SQL");
  return issues;
}

std::string_view to_string(CompileMode mode) {
  switch (mode) {
    case CompileMode::CotInjection:
      return "cot_injection";
    case CompileMode::NoCot:
      return "no_cot";
    case CompileMode::CotAblation:
      return "cot_ablation";
  }
  return "unknown";
}

CompileMode compile_mode_from_string(std::string_view name) {
  const std::string n = text::to_lower(name);
  if (n == "cot_injection" || n == "cot-injection") return CompileMode::CotInjection;
  if (n == "no_cot" || n == "no-cot") return CompileMode::NoCot;
  if (n == "cot_ablation" || n == "cot-ablation" || n == "cot") return CompileMode::CotAblation;
  throw DataError("unknown compile mode '" + std::string(name) + "'");
}

std::string schema_link_user_prompt(std::string_view question, std::string_view slice_text,
                                    const std::vector<std::string>* selected) {
  std::string out = "Question: ";
  out += question;
  out += "\nTables:\n";
  out += slice_text;
  if (selected) {
    out += "\nKnown relevant tables: ";
    out += selected->empty() ? std::string(kNoSelectionYet) : text::join(*selected, ", ");
  }
  return out;
}

std::string sql_generation_user_prompt(std::string_view question, const std::vector<std::string>& renderings) {
  std::string out = "Question: ";
  out += question;
  out += "\nTables:\n";
  out += text::join(renderings, kSliceTableSeparator);
  return out;
}

std::vector<SftRecord> compile_schema_link(const std::vector<QAExample>& examples, const SliceSet& slices,
                                           CompileMode mode) {
  std::unordered_map<std::string, std::size_t> slice_of;
  for (std::size_t j = 0; j < slices.slices.size(); ++j) {
    for (const auto& name : slices.slices[j].table_names) slice_of.emplace(text::to_lower(name), j);
  }

  const std::string mode_name(to_string(mode));
  std::vector<SftRecord> records;
  for (const auto& ex : examples) {
    if (!ex.db_id.empty() && !slices.source_db_id.empty() && ex.db_id != slices.source_db_id) {
      throw CompileError("question " + ex.question_id + " targets database '" + ex.db_id +
                         "' but the slices come from '" + slices.source_db_id + "'");
    }
    if (ex.gold_tables.empty()) throw CompileError("question " + ex.question_id + " has no gold tables");
    std::set<std::string> gold;
    for (const auto& t : ex.gold_tables) {
      const std::string key = text::to_lower(t);
      if (!slice_of.count(key)) {
        throw CompileError("question " + ex.question_id + ": gold table '" + t + "' is not in any slice");
      }
      gold.insert(key);
    }

    std::vector<std::string> selected;
    for (const auto& slice : slices.slices) {
      std::vector<std::string> positives;
      for (const auto& name : slice.table_names) {
        if (gold.count(text::to_lower(name))) positives.push_back(name);
      }
      const std::string assistant = positives.empty() ? std::string(kNoneToken) : text::join(positives, ", ");
      const bool inject = mode == CompileMode::CotInjection;
      records.push_back(SftRecord{
          std::string(kSchemaLinkSystemPrompt),
          schema_link_user_prompt(ex.question, slice.rendered_text, inject ? &selected : nullptr),
          assistant,
          SftMeta{ex.question_id, slice.slice_index, mode_name, false},
      });
      if (inject && !positives.empty()) {
        records.push_back(SftRecord{
            std::string(kSchemaLinkSystemPrompt),
            schema_link_user_prompt(ex.question, slice.rendered_text, nullptr),
            assistant,
            SftMeta{ex.question_id, slice.slice_index, mode_name, true},
        });
      }
      selected.insert(selected.end(), positives.begin(), positives.end());
    }
  }
  return records;
}

std::vector<std::string> sql_context_tables(const QAExample& example, const DatabaseSchema& schema,
                                            const SqlGenOptions& options, std::vector<std::string>* warnings) {
  std::set<std::string> chosen;
  for (const auto& t : example.gold_tables) {
    if (!find_table(schema, t)) {
      throw CompileError("question " + example.question_id + ": gold table '" + t + "' is not in the schema");
    }
    chosen.insert(text::to_lower(t));
  }

  if (options.predicted_tables) {
    const auto it = options.predicted_tables->find(example.question_id);
    if (it == options.predicted_tables->end()) {
      if (warnings) warnings->push_back("question " + example.question_id + ": no predicted tables, using gold only");
    } else {
      for (const auto& t : it->second) {
        if (!find_table(schema, t)) {
          throw CompileError("question " + example.question_id + ": predicted table '" + t +
                             "' is not in the schema");
        }
        chosen.insert(text::to_lower(t));
      }
    }
  } else if (options.noise_tables > 0) {
    std::vector<std::string> candidates;
    for (const auto& table : schema.tables) {
      if (!chosen.count(text::to_lower(table.name))) candidates.push_back(table.name);
    }
    std::size_t k = options.noise_tables;
    if (k > candidates.size()) {
      if (warnings) {
        warnings->push_back("question " + example.question_id + ": requested " + std::to_string(k) +
                            " noise tables but only " + std::to_string(candidates.size()) + " are available");
      }
      k = candidates.size();
    }
    SeededRng rng(options.seed ^ fnv1a64(example.question_id));
    // Partial Fisher-Yates: the first k positions form the sample.
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(candidates[i], candidates[i + rng.below(candidates.size() - i)]);
      chosen.insert(text::to_lower(candidates[i]));
    }
  }

  std::vector<std::string> out;
  for (const auto& table : schema.tables) {
    if (chosen.count(text::to_lower(table.name))) out.push_back(table.name);
  }
  return out;
}

SqlGenResult compile_sql_generation(const std::vector<QAExample>& examples, const DatabaseSchema& schema,
                                    const SqlGenOptions& options) {
  SqlGenResult result;
  for (const auto& ex : examples) {
    if (text::trim(ex.gold_sql).empty()) throw CompileError("question " + ex.question_id + " has empty gold SQL");
    std::vector<std::string> renderings;
    for (const auto& name : sql_context_tables(ex, schema, options, &result.warnings)) {
      renderings.push_back(render_table(*find_table(schema, name)));
    }
    result.records.push_back(SftRecord{
        std::string(kSqlGenerationSystemPrompt),
        sql_generation_user_prompt(ex.question, renderings),
        ex.gold_sql,
        SftMeta{ex.question_id, std::nullopt, "sql_generation", false},
    });
  }
  return result;
}

std::string_view to_string(TemplateDialect dialect) {
  return dialect == TemplateDialect::GenericChatJsonl ? "generic-chat-jsonl" : "role-tagged-text";
}

TemplateDialect template_dialect_from_string(std::string_view name) {
  if (name == "generic-chat-jsonl") return TemplateDialect::GenericChatJsonl;
  if (name == "role-tagged-text") return TemplateDialect::RoleTaggedText;
  throw DataError("unknown template dialect '" + std::string(name) + "'");
}

namespace {

nlohmann::ordered_json messages_json(std::string_view system, std::string_view user, std::string_view assistant) {
  return nlohmann::ordered_json::array({
      {{"role", "system"}, {"content", system}},
      {{"role", "user"}, {"content", user}},
      {{"role", "assistant"}, {"content", assistant}},
  });
}

std::string role_tagged(std::string_view system, std::string_view user, std::string_view assistant) {
  std::string out = "<system>\n";
  out += system;
  out += "\n<user>\n";
  out += user;
  out += "\n<assistance>\n";
  out += assistant;
  out += "\n<endoftext>";
  return out;
}

}  // namespace

std::string render_template(std::string_view system, std::string_view user, std::string_view assistant,
                            TemplateDialect dialect) {
  if (dialect == TemplateDialect::RoleTaggedText) return role_tagged(system, user, assistant);
  nlohmann::ordered_json doc;
  doc["messages"] = messages_json(system, user, assistant);
  return doc.dump();
}

std::string sft_record_to_jsonl(const SftRecord& record, TemplateDialect dialect) {
  nlohmann::ordered_json doc;
  if (dialect == TemplateDialect::RoleTaggedText) {
    doc["text"] = role_tagged(record.system, record.user, record.assistant);
  } else {
    doc["messages"] = messages_json(record.system, record.user, record.assistant);
  }
  nlohmann::ordered_json meta;
  meta["question_id"] = record.meta.question_id;
  if (record.meta.slice_index) meta["slice_index"] = *record.meta.slice_index;
  meta["mode"] = record.meta.mode;
  meta["is_balancing_duplicate"] = record.meta.is_balancing_duplicate;
  doc["meta"] = std::move(meta);
  return doc.dump();
}

void write_sft_jsonl(const std::filesystem::path& path, const std::vector<SftRecord>& records,
                     TemplateDialect dialect) {
  auto out = open_for_write(path);
  for (const auto& r : records) out << sft_record_to_jsonl(r, dialect) << '\n';
}

DatasetSplit split_examples(const std::vector<QAExample>& examples, std::uint64_t seed) {
  const std::size_t n = examples.size();
  const std::size_t n_validation = (n + 5) / 10;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  SeededRng rng(seed);
  rng.shuffle(order);
  std::vector<bool> is_validation(n, false);
  for (std::size_t i = 0; i < n_validation; ++i) is_validation[order[i]] = true;

  DatasetSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    (is_validation[i] ? split.validation : split.train).push_back(examples[i]);
  }
  return split;
}

}  // namespace lrsql
