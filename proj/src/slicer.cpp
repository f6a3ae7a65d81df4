#include "lrsql/slicer.hpp"

#include <map>
#include <set>

#include "lrsql/errors.hpp"
#include "lrsql/text.hpp"

namespace lrsql {

namespace {

class SliceBuilder {
 public:
  SliceBuilder(const TokenBudget& budget, const TokenCounterSpec& counter, SliceOptions options)
      : budget_(budget), counter_(counter), options_(options) {}

  void add(const TableDef& table) {
    const std::string rendered = render_table(table);
    const std::size_t alone = count_tokens(counter_, rendered);
    if (alone >= budget_.slice_token) {
      if (!options_.allow_oversize) throw OversizeTableError(table.name, alone, budget_.slice_token);
      seal();
      out_.push_back(Slice{out_.size(), {table.name}, rendered, alone, true});
      return;
    }
    if (!names_.empty()) {
      std::string candidate = text_;
      candidate += kSliceTableSeparator;
      candidate += rendered;
      const std::size_t combined = count_tokens(counter_, candidate);
      if (combined < budget_.slice_token) {
        names_.push_back(table.name);
        text_ = std::move(candidate);
        tokens_ = combined;
        return;
      }
      seal();
    }
    names_.push_back(table.name);
    text_ = rendered;
    tokens_ = alone;
  }

  std::vector<Slice> finish() {
    seal();
    return std::move(out_);
  }

 private:
  void seal() {
    if (names_.empty()) return;
    out_.push_back(Slice{out_.size(), std::move(names_), std::move(text_), tokens_, false});
    names_.clear();
    text_.clear();
    tokens_ = 0;
  }

  const TokenBudget& budget_;
  const TokenCounterSpec& counter_;
  SliceOptions options_;
  std::vector<std::string> names_;
  std::string text_;
  std::size_t tokens_ = 0;
  std::vector<Slice> out_;
};

const TableDef& require_table(const DatabaseSchema& schema, const std::string& name) {
  const TableDef* table = find_table(schema, name);
  if (!table) throw DataError("partition names table '" + name + "' missing from schema '" + schema.db_id + "'");
  return *table;
}

}  // namespace

SliceSet build_slices(const DatabaseSchema& schema, const GroupPartition& partition, const TokenBudget& budget,
                      const TokenCounterSpec& counter, SliceOptions options) {
  if (budget.slice_token == 0) throw BudgetError("slice_token must be positive");
  SliceBuilder builder(budget, counter, options);
  for (const auto& group : partition.reference_groups) {
    for (const auto& name : group.member_tables) builder.add(require_table(schema, name));
  }
  for (const auto& name : partition.no_reference_tables) builder.add(require_table(schema, name));
  return SliceSet{builder.finish(), budget, counter, schema.db_id};
}

SliceSet reslice(const DatabaseSchema& schema, const GroupPartition& partition,
                 const TokenBudget& inference_budget, const TokenCounterSpec& counter, SliceOptions options) {
  return build_slices(schema, partition, inference_budget, counter, options);
}

std::string_view to_string(SliceViolationKind kind) {
  switch (kind) {
    case SliceViolationKind::Totality:
      return "totality";
    case SliceViolationKind::Disjointness:
      return "disjointness";
    case SliceViolationKind::Budget:
      return "budget";
    case SliceViolationKind::CountConsistency:
      return "count-consistency";
    case SliceViolationKind::UnknownTable:
      return "unknown-table";
    case SliceViolationKind::EmptySlice:
      return "empty-slice";
  }
  return "unknown";
}

std::size_t SliceReport::count(SliceViolationKind kind) const {
  std::size_t n = 0;
  for (const auto& v : violations) n += v.kind == kind ? 1 : 0;
  return n;
}

SliceReport validate_slices(const SliceSet& slices, const DatabaseSchema& schema) {
  SliceReport report;
  const auto add = [&](SliceViolationKind kind, std::string message) {
    report.violations.push_back(SliceViolation{kind, std::move(message)});
  };

  std::map<std::string, std::size_t> seen;  // lowercased name -> first slice index
  for (const auto& slice : slices.slices) {
    const std::string where = "slice " + std::to_string(slice.slice_index);
    if (slice.table_names.empty()) add(SliceViolationKind::EmptySlice, where + " holds no tables");
    for (const auto& name : slice.table_names) {
      if (!find_table(schema, name)) {
        add(SliceViolationKind::UnknownTable, where + " names table '" + name + "' missing from schema");
      }
      const auto [it, inserted] = seen.emplace(text::to_lower(name), slice.slice_index);
      if (!inserted) {
        add(SliceViolationKind::Disjointness, "table '" + name + "' appears in slice " +
                                                  std::to_string(it->second) + " and " + where);
      }
    }
    if (!slice.oversize && slice.token_count >= slices.budget.slice_token) {
      add(SliceViolationKind::Budget, where + " counts " + std::to_string(slice.token_count) +
                                          " tokens, not below slice_token " +
                                          std::to_string(slices.budget.slice_token));
    }
    if (slice.oversize && slice.table_names.size() != 1) {
      add(SliceViolationKind::Budget, where + " is flagged oversize but holds several tables");
    }
    const bool countable = slices.counter.kind != CounterKind::ExternalTable || slices.counter.external;
    if (countable) {
      std::size_t actual = 0;
      bool counted = true;
      try {
        actual = count_tokens(slices.counter, slice.rendered_text);
      } catch (const DataError& e) {
        counted = false;
        add(SliceViolationKind::CountConsistency, where + ": " + e.what());
      }
      if (counted && actual != slice.token_count) {
        add(SliceViolationKind::CountConsistency, where + " records " + std::to_string(slice.token_count) +
                                                      " tokens but its text counts " + std::to_string(actual));
      }
    }
  }
  for (const auto& table : schema.tables) {
    if (!seen.count(text::to_lower(table.name))) {
      add(SliceViolationKind::Totality, "table '" + table.name + "' is in no slice");
    }
  }
  return report;
}

nlohmann::ordered_json slice_set_to_json(const SliceSet& slices) {
  nlohmann::ordered_json items = nlohmann::ordered_json::array();
  for (const auto& slice : slices.slices) {
    nlohmann::ordered_json item;
    item["index"] = slice.slice_index;
    item["tables"] = slice.table_names;
    item["text"] = slice.rendered_text;
    item["tokens"] = slice.token_count;
    if (slice.oversize) item["oversize"] = true;
    items.push_back(std::move(item));
  }
  nlohmann::ordered_json doc;
  doc["db_id"] = slices.source_db_id;
  doc["slice_token"] = slices.budget.slice_token;
  doc["counter"] = std::string(to_string(slices.counter.kind));
  doc["slices"] = std::move(items);
  return doc;
}

SliceSet slice_set_from_json(const nlohmann::json& doc) {
  try {
    SliceSet out;
    out.source_db_id = doc.at("db_id").get<std::string>();
    out.budget = explicit_slice_budget(doc.at("slice_token").get<std::size_t>());
    out.counter.kind = counter_kind_from_string(doc.at("counter").get<std::string>());
    for (const auto& item : doc.at("slices")) {
      Slice slice;
      slice.slice_index = item.at("index").get<std::size_t>();
      slice.table_names = item.at("tables").get<std::vector<std::string>>();
      slice.rendered_text = item.at("text").get<std::string>();
      slice.token_count = item.at("tokens").get<std::size_t>();
      slice.oversize = item.value("oversize", false);
      out.slices.push_back(std::move(slice));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed slice set: ") + e.what());
  }
}

}  // namespace lrsql
