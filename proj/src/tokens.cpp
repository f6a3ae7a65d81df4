#include "lrsql/tokens.hpp"

#include <cctype>
#include <fstream>

#include <nlohmann/json.hpp>

#include "lrsql/errors.hpp"
#include "lrsql/text.hpp"

namespace lrsql {

std::string_view to_string(CounterKind kind) {
  switch (kind) {
    case CounterKind::HeuristicWords:
      return "heuristic-words";
    case CounterKind::BytesQuarter:
      return "bytes-quarter";
    case CounterKind::ExternalTable:
      return "external-table";
  }
  return "unknown";
}

CounterKind counter_kind_from_string(std::string_view name) {
  if (name == "heuristic-words") return CounterKind::HeuristicWords;
  if (name == "bytes-quarter") return CounterKind::BytesQuarter;
  if (name == "external-table") return CounterKind::ExternalTable;
  throw DataError("unknown token counter kind '" + std::string(name) + "'");
}

TokenCounterSpec TokenCounterSpec::external_table(std::shared_ptr<const TokenCountTable> table) {
  if (!table) throw DataError("external-table token counter requires a count table");
  return {CounterKind::ExternalTable, std::move(table)};
}

std::shared_ptr<const TokenCountTable> load_token_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open token count table '" + path.string() + "'");
  auto table = std::make_shared<TokenCountTable>();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      const auto row = nlohmann::json::parse(line);
      const auto tokens = row.at("tokens").get<long long>();
      if (tokens < 0) throw ParseError("negative token count", lineno, 1);
      (*table)[text::to_lower(row.at("sha256").get<std::string>())] = static_cast<std::size_t>(tokens);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno, 1);
    }
  }
  return table;
}

std::size_t count_tokens(const TokenCounterSpec& spec, std::string_view text) {
  if (!text::is_valid_utf8(text)) throw DataError("token counting requires valid UTF-8 text");
  switch (spec.kind) {
    case CounterKind::HeuristicWords: {
      std::size_t count = 0;
      bool in_run = false;
      for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
          in_run = false;
          continue;
        }
        if (!in_run) ++count;
        in_run = true;
        if (c < 0x80 && std::ispunct(c)) ++count;
      }
      return count;
    }
    case CounterKind::BytesQuarter:
      return (text.size() + 3) / 4;
    case CounterKind::ExternalTable: {
      if (!spec.external) throw DataError("external-table token counter has no count table");
      if (text.empty()) return 0;
      const auto it = spec.external->find(text::sha256_hex(text));
      if (it == spec.external->end()) {
        throw UncountedTextError("uncounted text (sha256 " + text::sha256_hex(text) +
                                 ") missing from the external token table");
      }
      return it->second;
    }
  }
  return 0;
}

TokenBudget derive_slice_budget(std::size_t max_token, std::size_t model_token, std::size_t margin) {
  // slice_token < max_token - model_token must hold strictly, so the margin
  // has to absorb at least one token.
  if (model_token == 0 || margin == 0 || max_token <= model_token + margin) {
    throw BudgetError("infeasible token budget: need max_token > model_token + margin with "
                      "model_token > 0 and margin > 0 (got max_token " + std::to_string(max_token) +
                      ", model_token " + std::to_string(model_token) + ", margin " +
                      std::to_string(margin) + ")");
  }
  return TokenBudget{max_token, model_token, max_token - model_token - margin};
}

TokenBudget explicit_slice_budget(std::size_t slice_token, std::size_t model_token) {
  if (slice_token == 0) throw BudgetError("slice_token must be positive");
  if (model_token == 0) model_token = 1;
  return TokenBudget{slice_token + model_token + 1, model_token, slice_token};
}

}  // namespace lrsql
