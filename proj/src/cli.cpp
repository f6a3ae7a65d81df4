#include "lrsql/cli.hpp"

#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "lrsql/config.hpp"
#include "lrsql/errors.hpp"
#include "lrsql/evaluator.hpp"
#include "lrsql/inference.hpp"
#include "lrsql/slicer.hpp"
#include "lrsql/text.hpp"

namespace lrsql {

namespace {

namespace fs = std::filesystem;

struct Overrides {
  std::optional<std::string> config;
  std::optional<std::string> schema, db_id, qa, counter, token_table, mode, dialect;
  std::optional<std::string> backend, endpoint, model, replay, api_key_env, slices;
  std::optional<std::string> predicted_tables, db_dir, output_dir;
  std::optional<std::string> table_predictions, sql_predictions;
  std::optional<std::size_t> max_token, model_token, margin, slice_token, inference_slice_token;
  std::optional<std::size_t> noise_tables, max_in_flight;
  std::optional<long long> timeout_ms, backoff_ms, query_timeout_ms;
  std::optional<int> retries;
  std::optional<std::uint64_t> seed;
  bool allow_oversize = false;
  bool no_sql = false;
  bool record_latency = false;
  std::optional<std::string> sweep;
  std::string what = "both";
};

void add_common(CLI::App& cmd, Overrides& o) {
  cmd.add_option("-c,--config", o.config, "JSON pipeline config; flags override its fields");
  cmd.add_option("-o,--output-dir", o.output_dir, "Directory for all written artifacts");
  cmd.add_option("--seed", o.seed, "Seed for splits and noise sampling");
}

void add_schema(CLI::App& cmd, Overrides& o) {
  cmd.add_option("-s,--schema", o.schema, "Schema file: native JSON, Spider tables.json, or .sql DDL");
  cmd.add_option("--db-id", o.db_id, "Database to pick from a multi-database tables.json");
}

void add_budget(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--max-token", o.max_token, "Token capacity of one training instance");
  cmd.add_option("--model-token", o.model_token, "Tokens taken by the template and special tokens");
  cmd.add_option("--margin", o.margin, "Safety margin subtracted from the slice budget");
  cmd.add_option("--slice-token", o.slice_token, "Explicit slice budget (overrides max/model/margin)");
  cmd.add_option("--counter", o.counter, "Token counter: heuristic-words, bytes-quarter, external-table");
  cmd.add_option("--token-table", o.token_table, "JSONL of {sha256, tokens} for the external-table counter");
  cmd.add_flag("--allow-oversize", o.allow_oversize, "Give a table that alone exceeds the budget its own slice");
}

void add_qa(CLI::App& cmd, Overrides& o) {
  cmd.add_option("-q,--qa", o.qa, "QA JSONL with question_id, db_id, question, gold_tables, gold_sql");
}

void add_mode(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--mode", o.mode, "cot_injection, no_cot, or cot_ablation");
}

void add_compile(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--dialect", o.dialect, "generic-chat-jsonl or role-tagged-text");
  cmd.add_option("--noise-tables", o.noise_tables, "Random non-gold tables added to SQL-generation context");
  cmd.add_option("--predicted-tables", o.predicted_tables,
                 "Table predictions JSONL used as SQL-generation context instead of random noise");
}

void add_backend(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--backend", o.backend, "mock-oracle, scripted-replay, or http-chat");
  cmd.add_option("--endpoint", o.endpoint, "OpenAI-compatible base URL or chat/completions URL");
  cmd.add_option("--model", o.model, "Model name sent to the http-chat endpoint");
  cmd.add_option("--replay", o.replay, "Scripted responses JSONL for scripted-replay");
  cmd.add_option("--api-key-env", o.api_key_env, "Environment variable holding the API key");
  cmd.add_option("--max-in-flight", o.max_in_flight, "Questions processed concurrently");
  cmd.add_option("--timeout-ms", o.timeout_ms, "Per-request backend timeout");
  cmd.add_option("--retries", o.retries, "Retries per backend call before the call fails");
  cmd.add_option("--backoff-ms", o.backoff_ms, "First retry delay; doubles per retry");
  cmd.add_option("--inference-slice-token", o.inference_slice_token,
                 "Reslice with this budget at inference instead of the training budget");
  cmd.add_option("--slices", o.slices, "Use this slice file instead of slicing the schema");
  cmd.add_flag("--no-sql", o.no_sql, "Skip SQL generation");
  cmd.add_flag("--record-latency", o.record_latency, "Write per-slice latency into the predictions file");
}

void add_eval(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--db-dir", o.db_dir, "Directory of SQLite databases, one per db_id");
  cmd.add_option("--query-timeout-ms", o.query_timeout_ms, "Per-query timeout for execution accuracy");
  cmd.add_option("--table-predictions", o.table_predictions, "Table predictions JSONL");
  cmd.add_option("--sql-predictions", o.sql_predictions, "SQL predictions JSONL");
}

PipelineConfig merge(const Overrides& o) {
  PipelineConfig c = o.config ? load_config(*o.config) : PipelineConfig{};
  if (o.schema) c.schema_path = *o.schema;
  if (o.db_id) c.schema_db_id = *o.db_id;
  if (o.qa) c.qa_path = *o.qa;
  if (o.max_token) c.max_token = *o.max_token;
  if (o.model_token) c.model_token = *o.model_token;
  if (o.margin) c.margin = *o.margin;
  if (o.slice_token) c.slice_token = *o.slice_token;
  if (o.inference_slice_token) c.inference_slice_token = *o.inference_slice_token;
  if (o.counter) c.counter = counter_kind_from_string(*o.counter);
  if (o.token_table) c.token_table_path = *o.token_table;
  if (o.allow_oversize) c.allow_oversize = true;
  if (o.mode) c.mode = compile_mode_from_string(*o.mode);
  if (o.dialect) c.dialect = template_dialect_from_string(*o.dialect);
  if (o.noise_tables) c.noise_tables = *o.noise_tables;
  if (o.predicted_tables) c.predicted_tables_path = *o.predicted_tables;
  if (o.backend) c.backend.kind = backend_kind_from_string(*o.backend);
  if (o.endpoint) c.backend.endpoint = *o.endpoint;
  if (o.model) c.backend.model = *o.model;
  if (o.replay) c.backend.replay_path = *o.replay;
  if (o.api_key_env) c.backend.api_key_env = *o.api_key_env;
  if (o.max_in_flight) c.backend.max_in_flight = *o.max_in_flight;
  if (o.timeout_ms) c.backend.timeout = std::chrono::milliseconds(*o.timeout_ms);
  if (o.retries) c.retry.retries = *o.retries;
  if (o.backoff_ms) c.retry.base_delay = std::chrono::milliseconds(*o.backoff_ms);
  if (o.slices) c.slices_path = *o.slices;
  if (o.no_sql) c.generate_sql = false;
  if (o.record_latency) c.record_latency = true;
  if (o.db_dir) c.db_dir = *o.db_dir;
  if (o.query_timeout_ms) c.query_timeout = std::chrono::milliseconds(*o.query_timeout_ms);
  if (o.seed) c.seed = *o.seed;
  if (o.output_dir) c.output_dir = *o.output_dir;
  return c;
}

void require_path(const std::optional<fs::path>& p, const char* what) {
  if (!p) throw DataError(std::string("no ") + what + " configured");
  if (!fs::exists(*p)) throw DataError(std::string(what) + " '" + p->string() + "' does not exist");
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f << content;
}

DatabaseSchema schema_for(const PipelineConfig& c, std::ostream& err) {
  require_path(c.schema_path, "schema file");
  std::vector<std::string> warnings;
  auto schema = load_configured_schema(c, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  return schema;
}

std::vector<QAExample> qa_for(const PipelineConfig& c, const DatabaseSchema& schema) {
  require_path(c.qa_path, "QA file");
  auto examples = load_qa_jsonl(*c.qa_path);
  std::vector<std::string> issues;
  for (const auto& ex : examples) {
    auto found = qa_issues(ex, schema);
    issues.insert(issues.end(), found.begin(), found.end());
  }
  if (!issues.empty()) throw CompileError("invalid QA examples:\n  - " + text::join(issues, "\n  - "));
  return examples;
}

std::vector<std::size_t> parse_sweep(const std::string& spec) {
  std::vector<std::size_t> values;
  if (spec.find(':') != std::string::npos) {
    std::size_t from = 0, to = 0, step = 0;
    char c1 = 0, c2 = 0;
    std::istringstream in(spec);
    if (!(in >> from >> c1 >> to >> c2 >> step) || c1 != ':' || c2 != ':' || step == 0 || from == 0 || to < from) {
      throw DataError("sweep must look like FROM:TO:STEP with positive values");
    }
    for (std::size_t v = from; v <= to; v += step) values.push_back(v);
  } else {
    std::istringstream in(spec);
    std::string item;
    while (std::getline(in, item, ',')) {
      try {
        values.push_back(std::stoul(std::string(text::trim(item))));
      } catch (const std::exception&) {
        throw DataError("bad sweep value '" + item + "'");
      }
    }
  }
  if (values.empty()) throw DataError("empty sweep");
  return values;
}

SliceSet training_slices(const PipelineConfig& c, const DatabaseSchema& schema) {
  return build_slices(schema, group_by_foreign_keys(schema), training_budget(c), token_counter(c),
                      SliceOptions{c.allow_oversize});
}

int cmd_slice(const PipelineConfig& c, const std::optional<std::string>& sweep, std::ostream& out,
              std::ostream& err) {
  const auto schema = schema_for(c, err);
  const auto partition = group_by_foreign_keys(schema);
  const auto counter = token_counter(c);

  if (sweep) {
    std::string csv = "slice_token,total_w\n";
    for (std::size_t st : parse_sweep(*sweep)) {
      const auto set = reslice(schema, partition, explicit_slice_budget(st, c.model_token.value_or(0)), counter,
                               SliceOptions{c.allow_oversize});
      csv += std::to_string(st) + "," + std::to_string(set.slices.size()) + "\n";
    }
    write_text(c.output_dir / "slice_sweep.csv", csv);
    out << csv;
    return kExitOk;
  }

  const auto slices = build_slices(schema, partition, training_budget(c), counter, SliceOptions{c.allow_oversize});
  write_text(c.output_dir / "slices.json", slice_set_to_json(slices).dump(2) + "\n");
  out << "db_id " << schema.db_id << ": " << schema.tables.size() << " tables, "
      << partition.reference_groups.size() << " correlation groups, " << partition.no_reference_tables.size()
      << " unreferenced\n";
  out << "total(w) = " << slices.slices.size() << " (slice_token " << slices.budget.slice_token << ", counter "
      << to_string(slices.counter.kind) << ")\n";
  for (const auto& s : slices.slices) {
    out << "  slice " << s.slice_index << ": " << s.token_count << " tokens, " << s.table_names.size()
        << " tables" << (s.oversize ? " [oversize]" : "") << '\n';
  }
  return kExitOk;
}

int cmd_gen_dataset(const PipelineConfig& c, const std::string& what, std::ostream& out, std::ostream& err) {
  if (what != "schema-link" && what != "sql" && what != "both") {
    throw DataError("--what must be schema-link, sql, or both");
  }
  const auto schema = schema_for(c, err);
  const auto examples = qa_for(c, schema);
  const auto slices = training_slices(c, schema);
  const auto split = split_examples(examples, c.seed);

  write_text(c.output_dir / "slices.json", slice_set_to_json(slices).dump(2) + "\n");
  write_qa_jsonl(c.output_dir / "qa_train.jsonl", split.train);
  write_qa_jsonl(c.output_dir / "qa_validation.jsonl", split.validation);
  out << "split: " << split.train.size() << " train, " << split.validation.size() << " validation\n";

  const std::pair<const char*, const std::vector<QAExample>*> parts[] = {{"train", &split.train},
                                                                          {"validation", &split.validation}};
  if (what != "sql") {
    for (const auto& [name, part] : parts) {
      const auto records = compile_schema_link(*part, slices, c.mode);
      write_sft_jsonl(c.output_dir / (std::string("schema_link_") + name + ".jsonl"), records, c.dialect);
      std::size_t dups = 0;
      for (const auto& r : records) dups += r.meta.is_balancing_duplicate ? 1 : 0;
      out << "schema_link " << name << " (" << to_string(c.mode) << "): " << records.size() << " records, "
          << dups << " balancing duplicates\n";
    }
  }
  if (what != "schema-link") {
    SqlGenOptions opts;
    opts.noise_tables = c.noise_tables;
    opts.seed = c.seed;
    if (c.predicted_tables_path) {
      std::map<std::string, std::vector<std::string>> predicted;
      for (const auto& p : load_table_predictions(*c.predicted_tables_path)) {
        predicted[p.question_id] = p.predicted_tables;
      }
      opts.predicted_tables = std::move(predicted);
    }
    for (const auto& [name, part] : parts) {
      auto result = compile_sql_generation(*part, schema, opts);
      for (const auto& w : result.warnings) err << "warning: " << w << '\n';
      write_sft_jsonl(c.output_dir / (std::string("sql_generation_") + name + ".jsonl"), result.records,
                      c.dialect);
      out << "sql_generation " << name << ": " << result.records.size() << " records\n";
    }
  }
  return kExitOk;
}

int cmd_infer(const PipelineConfig& c, std::ostream& out, std::ostream& err) {
  const auto schema = schema_for(c, err);
  const auto examples = qa_for(c, schema);
  SliceSet slices;
  if (c.slices_path) {
    require_path(c.slices_path, "slice file");
    std::ifstream in(*c.slices_path);
    slices = slice_set_from_json(nlohmann::json::parse(in));
    const auto report = validate_slices(slices, schema);
    if (!report.ok()) {
      std::vector<std::string> issues;
      for (const auto& v : report.violations) issues.push_back(std::string(to_string(v.kind)) + ": " + v.message);
      throw DataError("slice file does not fit the schema:\n  - " + text::join(issues, "\n  - "));
    }
  } else {
    slices = reslice(schema, group_by_foreign_keys(schema), inference_budget(c), token_counter(c),
                     SliceOptions{c.allow_oversize});
  }

  auto backend = make_backend(c.backend, examples);
  PipelineOptions opts;
  opts.mode = c.mode;
  opts.max_in_flight = c.backend.max_in_flight;
  opts.generate_sql = c.generate_sql;
  opts.retry = c.retry;
  const auto results = run_pipeline(examples, slices, schema, *backend, *backend, opts);

  write_table_predictions(c.output_dir / "table_predictions.jsonl", results, c.record_latency);
  if (c.generate_sql) write_sql_predictions(c.output_dir / "sql_predictions.jsonl", results);

  std::size_t failed = 0;
  double latency_ms = 0;
  for (const auto& r : results) {
    for (const auto& o : r.tables.per_slice) {
      latency_ms += static_cast<double>(o.latency.count());
      if (o.failed) err << "warning: question " << r.tables.question_id << " slice " << o.slice_index << ": " << o.error << '\n';
    }
    if (r.tables.error) {
      ++failed;
      err << "error: question " << r.tables.question_id << ": " << *r.tables.error << '\n';
    }
    if (r.sql && r.sql->failed && !r.tables.error) {
      err << "warning: question " << r.tables.question_id << " SQL generation: " << r.sql->error << '\n';
    }
  }
  out << "questions: " << results.size() << ", failed: " << failed << ", slices per question: "
      << slices.slices.size() << '\n';
  if (!results.empty()) {
    out << "mean table-prediction latency per question: " << latency_ms / static_cast<double>(results.size())
        << " ms\n";
  }
  return !results.empty() && failed == results.size() ? kExitBackend : kExitOk;
}

int cmd_eval(const PipelineConfig& c, const Overrides& o, std::ostream& out) {
  require_path(c.qa_path, "QA file");
  ReportInputs inputs;
  inputs.gold = load_qa_jsonl(*c.qa_path);
  const fs::path tables_path = o.table_predictions ? fs::path(*o.table_predictions)
                                                   : c.output_dir / "table_predictions.jsonl";
  inputs.table_predictions = load_table_predictions(tables_path);
  const fs::path sql_path = o.sql_predictions ? fs::path(*o.sql_predictions) : c.output_dir / "sql_predictions.jsonl";
  if (o.sql_predictions || fs::exists(sql_path)) inputs.sql_predictions = load_sql_predictions(sql_path);
  inputs.db_dir = c.db_dir;
  inputs.query_timeout = c.query_timeout;
  inputs.config = config_echo(c);

  const auto report = build_report(inputs);
  const std::string text = report_to_text(report);
  write_text(c.output_dir / "report.json", report_to_json(report).dump(2) + "\n");
  write_text(c.output_dir / "report.txt", text);
  out << text;
  return kExitOk;
}

int cmd_pipeline(const PipelineConfig& c, const Overrides& o, std::ostream& out, std::ostream& err) {
  out << "== slice\n";
  cmd_slice(c, std::nullopt, out, err);
  out << "== gen-dataset\n";
  cmd_gen_dataset(c, "both", out, err);
  out << "== infer\n";
  if (const int rc = cmd_infer(c, out, err); rc != kExitOk) return rc;
  out << "== eval\n";
  Overrides eval_o = o;
  eval_o.table_predictions.reset();
  eval_o.sql_predictions.reset();
  return cmd_eval(c, eval_o, out);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Token-budgeted schema linking toolkit for Text2SQL fine-tuning and inference", "lrsql"};
  app.require_subcommand(1);
  Overrides o;

  auto* slice = app.add_subcommand("slice", "Partition a schema into token-budgeted slices");
  add_common(*slice, o);
  add_schema(*slice, o);
  add_budget(*slice, o);
  slice->add_option("--sweep", o.sweep, "Slice-token sweep (FROM:TO:STEP or a,b,c); writes slice_sweep.csv");

  auto* gen = app.add_subcommand("gen-dataset", "Compile schema-link and SQL-generation SFT datasets");
  add_common(*gen, o);
  add_schema(*gen, o);
  add_budget(*gen, o);
  add_qa(*gen, o);
  add_mode(*gen, o);
  add_compile(*gen, o);
  gen->add_option("--what", o.what, "schema-link, sql, or both")->capture_default_str();

  auto* infer = app.add_subcommand("infer", "Predict tables slice by slice, then generate SQL");
  add_common(*infer, o);
  add_schema(*infer, o);
  add_budget(*infer, o);
  add_qa(*infer, o);
  add_mode(*infer, o);
  add_backend(*infer, o);

  auto* eval = app.add_subcommand("eval", "Score predictions against gold");
  add_common(*eval, o);
  add_qa(*eval, o);
  add_eval(*eval, o);

  auto* pipeline = app.add_subcommand("pipeline", "Run slice, gen-dataset, infer and eval in sequence");
  add_common(*pipeline, o);
  add_schema(*pipeline, o);
  add_budget(*pipeline, o);
  add_qa(*pipeline, o);
  add_mode(*pipeline, o);
  add_compile(*pipeline, o);
  add_backend(*pipeline, o);
  add_eval(*pipeline, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    const PipelineConfig config = merge(o);
    if (slice->parsed()) return cmd_slice(config, o.sweep, out, err);
    if (gen->parsed()) return cmd_gen_dataset(config, o.what, out, err);
    if (infer->parsed()) return cmd_infer(config, out, err);
    if (eval->parsed()) return cmd_eval(config, o, out);
    if (pipeline->parsed()) return cmd_pipeline(config, o, out, err);
  } catch (const BackendError& e) {
    err << "error: " << e.what() << '\n';
    return kExitBackend;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace lrsql
