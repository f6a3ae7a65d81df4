#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>

namespace lrsql {

enum class CounterKind { HeuristicWords, BytesQuarter, ExternalTable };

std::string_view to_string(CounterKind kind);
CounterKind counter_kind_from_string(std::string_view name);

// Precomputed counts keyed by lowercase hex SHA-256 of the text.
using TokenCountTable = std::unordered_map<std::string, std::size_t>;

struct TokenCounterSpec {
  CounterKind kind = CounterKind::HeuristicWords;
  std::shared_ptr<const TokenCountTable> external;

  static TokenCounterSpec heuristic() { return {CounterKind::HeuristicWords, nullptr}; }
  static TokenCounterSpec bytes_quarter() { return {CounterKind::BytesQuarter, nullptr}; }
  static TokenCounterSpec external_table(std::shared_ptr<const TokenCountTable> table);
};

// Reads JSONL lines of {"sha256": hex, "tokens": int}.
std::shared_ptr<const TokenCountTable> load_token_table(const std::filesystem::path& path);

// heuristic-words: runs of non-whitespace plus ASCII punctuation inside them.
// bytes-quarter: ceil(bytes / 4). external-table: exact lookup, throws
// UncountedTextError on a miss.
std::size_t count_tokens(const TokenCounterSpec& spec, std::string_view text);

struct TokenBudget {
  std::size_t max_token = 0;
  std::size_t model_token = 0;
  std::size_t slice_token = 0;

  bool operator==(const TokenBudget&) const = default;
};

// slice_token = max_token - model_token - margin; requires
// max_token > model_token + margin.
TokenBudget derive_slice_budget(std::size_t max_token, std::size_t model_token, std::size_t margin);

// A budget fixed directly by slice_token, with max_token chosen as the
// smallest value that keeps the invariant.
TokenBudget explicit_slice_budget(std::size_t slice_token, std::size_t model_token = 0);

}  // namespace lrsql
