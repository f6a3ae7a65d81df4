#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrsql/schema.hpp"
#include "lrsql/tokens.hpp"

namespace lrsql {

struct Slice {
  std::size_t slice_index = 0;
  std::vector<std::string> table_names;
  std::string rendered_text;
  std::size_t token_count = 0;
  // A single table that alone reaches slice_token, admitted on request.
  bool oversize = false;

  bool operator==(const Slice&) const = default;
};

struct SliceSet {
  std::vector<Slice> slices;
  TokenBudget budget;
  TokenCounterSpec counter;
  std::string source_db_id;
};

struct SliceOptions {
  bool allow_oversize = false;
};

// Separator placed between table renderings inside one slice.
inline constexpr std::string_view kSliceTableSeparator = "\n\n";

// Greedy first-fit in partition order: correlation groups first, then the
// unreferenced tables. A table joins the open slice while the combined
// rendering counts strictly below slice_token; otherwise the slice is sealed.
SliceSet build_slices(const DatabaseSchema& schema, const GroupPartition& partition, const TokenBudget& budget,
                      const TokenCounterSpec& counter, SliceOptions options = {});

// Same contract as build_slices, for an inference-time granularity.
SliceSet reslice(const DatabaseSchema& schema, const GroupPartition& partition,
                 const TokenBudget& inference_budget, const TokenCounterSpec& counter,
                 SliceOptions options = {});

enum class SliceViolationKind { Totality, Disjointness, Budget, CountConsistency, UnknownTable, EmptySlice };

std::string_view to_string(SliceViolationKind kind);

struct SliceViolation {
  SliceViolationKind kind;
  std::string message;
};

struct SliceReport {
  std::vector<SliceViolation> violations;

  bool ok() const { return violations.empty(); }
  std::size_t count(SliceViolationKind kind) const;
};

SliceReport validate_slices(const SliceSet& slices, const DatabaseSchema& schema);

// {"db_id", "slice_token", "counter", "slices": [{"index", "tables", "text", "tokens"}]}
nlohmann::ordered_json slice_set_to_json(const SliceSet& slices);
SliceSet slice_set_from_json(const nlohmann::json& doc);

}  // namespace lrsql
