#include "lrsql/inference.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <thread>

#include "lrsql/text.hpp"

namespace lrsql {

namespace {

using Clock = std::chrono::steady_clock;

std::string call_with_retry(ChatBackend& backend, const ChatRequest& request, const RetryPolicy& retry,
                            int& attempts) {
  std::chrono::milliseconds delay = retry.base_delay;
  for (int attempt = 0;; ++attempt) {
    attempts = attempt + 1;
    try {
      return backend.complete(request);
    } catch (const BackendError&) {
      if (attempt >= retry.retries) throw;
    }
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    delay *= 2;
  }
}

std::vector<ChatMessage> chat(std::string_view system, std::string user) {
  return {ChatMessage{"system", std::string(system)}, ChatMessage{"user", std::move(user)}};
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

template <typename T, typename F>
std::vector<T> read_jsonl(const std::filesystem::path& path, F&& from_json) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<T> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno, 1);
    }
  }
  return out;
}

}  // namespace

QuestionFailedError::QuestionFailedError(TablePrediction partial)
    : BackendError("every slice failed for question " + partial.question_id), partial_(std::move(partial)) {}

ParsedTables parse_table_response(std::string_view raw, const std::vector<std::string>& slice_tables) {
  ParsedTables out;
  const std::string_view trimmed = text::trim(raw);
  if (trimmed == kNoneToken) return out;

  std::set<std::string> seen;
  std::size_t start = 0;
  while (start <= trimmed.size()) {
    std::size_t end = trimmed.find_first_of(",\n", start);
    if (end == std::string_view::npos) end = trimmed.size();
    const std::string_view token = text::trim(trimmed.substr(start, end - start));
    if (!token.empty()) {
      const std::string* match = nullptr;
      for (const auto& name : slice_tables) {
        if (text::iequals(name, token)) {
          match = &name;
          break;
        }
      }
      if (match) {
        if (seen.insert(text::to_lower(*match)).second) out.tables.push_back(*match);
      } else {
        out.discarded.emplace_back(token);
      }
    }
    start = end + 1;
  }
  return out;
}

TablePrediction predict_tables(std::string_view question_id, std::string_view question, const SliceSet& slices,
                               ChatBackend& backend, CompileMode mode, const RetryPolicy& retry) {
  TablePrediction prediction;
  prediction.question_id = std::string(question_id);
  std::set<std::string> seen;
  const bool inject = injects_selected_at_inference(mode);

  for (const auto& slice : slices.slices) {
    ChatRequest request;
    request.kind = RequestKind::SchemaLink;
    request.question_id = prediction.question_id;
    request.slice_index = slice.slice_index;
    request.slice_tables = slice.table_names;
    request.messages = chat(kSchemaLinkSystemPrompt,
                            schema_link_user_prompt(question, slice.rendered_text,
                                                    inject ? &prediction.predicted_tables : nullptr));

    SliceOutcome outcome;
    outcome.slice_index = slice.slice_index;
    const auto started = Clock::now();
    try {
      outcome.raw_response = call_with_retry(backend, request, retry, outcome.attempts);
      auto parsed = parse_table_response(outcome.raw_response, slice.table_names);
      outcome.parsed = std::move(parsed.tables);
      outcome.discarded = std::move(parsed.discarded);
    } catch (const std::exception& e) {
      outcome.failed = true;
      outcome.error = e.what();
    }
    outcome.latency = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started);

    for (const auto& name : outcome.parsed) {
      if (seen.insert(text::to_lower(name)).second) prediction.predicted_tables.push_back(name);
    }
    prediction.per_slice.push_back(std::move(outcome));
  }

  const bool all_failed = !prediction.per_slice.empty() &&
                          std::all_of(prediction.per_slice.begin(), prediction.per_slice.end(),
                                      [](const SliceOutcome& o) { return o.failed; });
  if (all_failed) {
    prediction.error = "every slice failed at the backend";
    throw QuestionFailedError(std::move(prediction));
  }
  return prediction;
}

std::string extract_sql(std::string_view raw) {
  std::string_view body = raw;
  if (const auto fence = body.find("```"); fence != std::string_view::npos) {
    body.remove_prefix(fence + 3);
    const auto eol = body.find('\n');
    body.remove_prefix(eol == std::string_view::npos ? body.size() : eol + 1);
    if (const auto close = body.find("```"); close != std::string_view::npos) body = body.substr(0, close);
  }

  char quote = 0;
  std::size_t end = body.size();
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '\'' || c == '"' || c == '`') {
      quote = c;
    } else if (c == ';') {
      end = i;
      break;
    }
  }
  return std::string(text::trim(body.substr(0, end)));
}

SqlPrediction generate_sql(std::string_view question_id, std::string_view question,
                           const TablePrediction& predicted, const DatabaseSchema& schema, ChatBackend& backend,
                           const RetryPolicy& retry) {
  if (predicted.error) {
    throw DataError("cannot generate SQL for question " + std::string(question_id) +
                    ": table prediction failed");
  }
  SqlPrediction out;
  out.question_id = std::string(question_id);
  std::vector<std::string> renderings;
  for (const auto& name : predicted.predicted_tables) {
    if (const TableDef* table = find_table(schema, name)) {
      out.context_tables.push_back(table->name);
      renderings.push_back(render_table(*table));
    }
  }

  ChatRequest request;
  request.kind = RequestKind::SqlGeneration;
  request.question_id = out.question_id;
  request.slice_tables = out.context_tables;
  request.messages = chat(kSqlGenerationSystemPrompt, sql_generation_user_prompt(question, renderings));
  int attempts = 0;
  try {
    out.predicted_sql = extract_sql(call_with_retry(backend, request, retry, attempts));
    if (out.predicted_sql.empty()) {
      out.failed = true;
      out.error = "backend returned no SQL";
    }
  } catch (const std::exception& e) {
    out.failed = true;
    out.error = e.what();
  }
  return out;
}

std::vector<PipelineResult> run_pipeline(const std::vector<QAExample>& examples, const SliceSet& slices,
                                         const DatabaseSchema& schema, ChatBackend& table_backend,
                                         ChatBackend& sql_backend, const PipelineOptions& options) {
  std::vector<PipelineResult> results(examples.size());
  std::atomic<std::size_t> next{0};

  const auto run_one = [&](std::size_t i) {
    const QAExample& ex = examples[i];
    PipelineResult& result = results[i];
    try {
      result.tables = predict_tables(ex.question_id, ex.question, slices, table_backend, options.mode, options.retry);
    } catch (const QuestionFailedError& e) {
      result.tables = e.partial();
    } catch (const std::exception& e) {
      result.tables = TablePrediction{ex.question_id, {}, {}, std::string(e.what())};
    }
    if (!options.generate_sql) return;
    if (result.tables.error) {
      result.sql = SqlPrediction{ex.question_id, "", {}, true, "skipped: table prediction failed"};
      return;
    }
    result.sql = generate_sql(ex.question_id, ex.question, result.tables, schema, sql_backend, options.retry);
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.max_in_flight, examples.size()));
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < examples.size(); i = next.fetch_add(1)) run_one(i);
      });
    }
  }
  return results;
}

nlohmann::ordered_json table_prediction_to_json(const TablePrediction& p, bool with_latency) {
  nlohmann::ordered_json per_slice = nlohmann::ordered_json::array();
  for (const auto& o : p.per_slice) {
    nlohmann::ordered_json item;
    item["slice_index"] = o.slice_index;
    item["raw_response"] = o.raw_response;
    item["parsed"] = o.parsed;
    item["discarded"] = o.discarded;
    item["attempts"] = o.attempts;
    item["failed"] = o.failed;
    if (o.failed) item["error"] = o.error;
    if (with_latency) item["latency_ms"] = o.latency.count();
    per_slice.push_back(std::move(item));
  }
  nlohmann::ordered_json row;
  row["question_id"] = p.question_id;
  row["predicted_tables"] = p.predicted_tables;
  row["per_slice"] = std::move(per_slice);
  if (p.error) row["error"] = *p.error;
  return row;
}

nlohmann::ordered_json sql_prediction_to_json(const SqlPrediction& p) {
  nlohmann::ordered_json row;
  row["question_id"] = p.question_id;
  row["predicted_sql"] = p.predicted_sql;
  row["context_tables"] = p.context_tables;
  row["failed"] = p.failed;
  if (p.failed) row["error"] = p.error;
  return row;
}

TablePrediction table_prediction_from_json(const nlohmann::json& row) {
  TablePrediction p;
  p.question_id = row.at("question_id").get<std::string>();
  p.predicted_tables = row.at("predicted_tables").get<std::vector<std::string>>();
  if (row.contains("per_slice")) {
    for (const auto& item : row.at("per_slice")) {
      SliceOutcome o;
      o.slice_index = item.at("slice_index").get<std::size_t>();
      o.raw_response = item.value("raw_response", std::string{});
      o.parsed = item.value("parsed", std::vector<std::string>{});
      o.discarded = item.value("discarded", std::vector<std::string>{});
      o.attempts = item.value("attempts", 0);
      o.failed = item.value("failed", false);
      o.error = item.value("error", std::string{});
      o.latency = std::chrono::milliseconds(item.value("latency_ms", 0LL));
      p.per_slice.push_back(std::move(o));
    }
  }
  if (row.contains("error")) p.error = row.at("error").get<std::string>();
  return p;
}

SqlPrediction sql_prediction_from_json(const nlohmann::json& row) {
  SqlPrediction p;
  p.question_id = row.at("question_id").get<std::string>();
  p.predicted_sql = row.value("predicted_sql", std::string{});
  p.context_tables = row.value("context_tables", std::vector<std::string>{});
  p.failed = row.value("failed", false);
  p.error = row.value("error", std::string{});
  return p;
}

void write_table_predictions(const std::filesystem::path& path, const std::vector<PipelineResult>& results,
                             bool with_latency) {
  auto out = open_for_write(path);
  for (const auto& r : results) out << table_prediction_to_json(r.tables, with_latency).dump() << '\n';
}

void write_sql_predictions(const std::filesystem::path& path, const std::vector<PipelineResult>& results) {
  auto out = open_for_write(path);
  for (const auto& r : results) {
    if (r.sql) out << sql_prediction_to_json(*r.sql).dump() << '\n';
  }
}

std::vector<TablePrediction> load_table_predictions(const std::filesystem::path& path) {
  return read_jsonl<TablePrediction>(path, table_prediction_from_json);
}

std::vector<SqlPrediction> load_sql_predictions(const std::filesystem::path& path) {
  return read_jsonl<SqlPrediction>(path, sql_prediction_from_json);
}

}  // namespace lrsql
