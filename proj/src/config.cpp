#include "lrsql/config.hpp"

#include <fstream>
#include <sstream>

#include "lrsql/ddl.hpp"
#include "lrsql/errors.hpp"

namespace lrsql {

namespace {

using nlohmann::json;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
void read_opt(const json& obj, const char* key, std::optional<T>& dst) {
  if (obj.contains(key) && !obj.at(key).is_null()) dst = obj.at(key).get<T>();
}

void read_path(const json& obj, const char* key, const std::filesystem::path& base,
               std::optional<std::filesystem::path>& dst) {
  if (obj.contains(key) && !obj.at(key).is_null()) dst = resolve(base, obj.at(key).get<std::string>());
}

}  // namespace

PipelineConfig config_from_json(const json& doc, const std::filesystem::path& base_dir) {
  PipelineConfig c;
  try {
    read_path(doc, "schema", base_dir, c.schema_path);
    read_opt(doc, "schema_db_id", c.schema_db_id);
    read_path(doc, "qa", base_dir, c.qa_path);
    if (doc.contains("budget")) {
      const json& b = doc.at("budget");
      read_opt(b, "max_token", c.max_token);
      read_opt(b, "model_token", c.model_token);
      c.margin = b.value("margin", c.margin);
      read_opt(b, "slice_token", c.slice_token);
      read_opt(b, "inference_slice_token", c.inference_slice_token);
    }
    if (doc.contains("counter")) {
      const json& k = doc.at("counter");
      if (k.is_string()) {
        c.counter = counter_kind_from_string(k.get<std::string>());
      } else {
        c.counter = counter_kind_from_string(k.value("kind", std::string(to_string(c.counter))));
        read_path(k, "table", base_dir, c.token_table_path);
      }
    }
    if (doc.contains("mode")) c.mode = compile_mode_from_string(doc.at("mode").get<std::string>());
    if (doc.contains("dialect")) c.dialect = template_dialect_from_string(doc.at("dialect").get<std::string>());
    c.noise_tables = doc.value("noise_tables", c.noise_tables);
    read_path(doc, "predicted_tables", base_dir, c.predicted_tables_path);
    c.allow_oversize = doc.value("allow_oversize", c.allow_oversize);
    if (doc.contains("backend")) {
      const json& b = doc.at("backend");
      c.backend.kind = backend_kind_from_string(b.value("kind", std::string(to_string(c.backend.kind))));
      read_opt(b, "endpoint", c.backend.endpoint);
      read_opt(b, "model", c.backend.model);
      c.backend.timeout = std::chrono::milliseconds(b.value("timeout_ms", c.backend.timeout.count()));
      c.backend.max_in_flight = b.value("max_in_flight", c.backend.max_in_flight);
      c.backend.api_key_env = b.value("api_key_env", c.backend.api_key_env);
      read_path(b, "replay", base_dir, c.backend.replay_path);
      c.retry.retries = b.value("retries", c.retry.retries);
      c.retry.base_delay = std::chrono::milliseconds(b.value("backoff_ms", c.retry.base_delay.count()));
    }
    c.generate_sql = doc.value("generate_sql", c.generate_sql);
    c.record_latency = doc.value("record_latency", c.record_latency);
    read_path(doc, "slices", base_dir, c.slices_path);
    read_path(doc, "db_dir", base_dir, c.db_dir);
    c.query_timeout = std::chrono::milliseconds(doc.value("query_timeout_ms", c.query_timeout.count()));
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("output_dir")) c.output_dir = resolve(base_dir, doc.at("output_dir").get<std::string>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid config: ") + e.what());
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed config '" + path.string() + "': " + e.what());
  }
  return config_from_json(doc, path.parent_path());
}

nlohmann::ordered_json config_echo(const PipelineConfig& c) {
  nlohmann::ordered_json doc;
  doc["mode"] = std::string(to_string(c.mode));
  doc["counter"] = std::string(to_string(c.counter));
  doc["slice_token"] = c.slice_token ? nlohmann::ordered_json(*c.slice_token) : nlohmann::ordered_json(nullptr);
  doc["inference_slice_token"] =
      c.inference_slice_token ? nlohmann::ordered_json(*c.inference_slice_token) : nlohmann::ordered_json(nullptr);
  doc["backend"] = std::string(to_string(c.backend.kind));
  doc["seed"] = c.seed;
  return doc;
}

TokenBudget training_budget(const PipelineConfig& c) {
  if (c.slice_token) return explicit_slice_budget(*c.slice_token, c.model_token.value_or(0));
  if (!c.max_token || !c.model_token) {
    throw BudgetError("a token budget needs slice_token, or max_token and model_token");
  }
  return derive_slice_budget(*c.max_token, *c.model_token, c.margin);
}

TokenBudget inference_budget(const PipelineConfig& c) {
  if (c.inference_slice_token) return explicit_slice_budget(*c.inference_slice_token, c.model_token.value_or(0));
  return training_budget(c);
}

TokenCounterSpec token_counter(const PipelineConfig& c) {
  if (c.counter != CounterKind::ExternalTable) return TokenCounterSpec{c.counter, nullptr};
  if (!c.token_table_path) throw DataError("external-table counter needs a token table path");
  return TokenCounterSpec::external_table(load_token_table(*c.token_table_path));
}

DatabaseSchema load_configured_schema(const PipelineConfig& c, std::vector<std::string>* warnings) {
  if (!c.schema_path) throw DataError("no schema path configured");
  if (c.schema_path->extension() == ".sql") {
    std::ifstream in(*c.schema_path);
    if (!in) throw DataError("cannot open DDL file '" + c.schema_path->string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    auto parsed = parse_ddl(text.str(), c.schema_db_id.value_or(c.schema_path->stem().string()));
    if (warnings) warnings->insert(warnings->end(), parsed.warnings.begin(), parsed.warnings.end());
    return parsed.schema;
  }
  return load_schema_json(*c.schema_path, c.schema_db_id);
}

}  // namespace lrsql
