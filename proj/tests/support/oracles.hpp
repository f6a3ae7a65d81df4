#pragma once

// Second implementations used as test oracles. They share no code with the
// library beyond the plain data types.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lrsql/schema.hpp"
#include "lrsql/slicer.hpp"

namespace lrsql::oracle {

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Connected components by transitive closure of the adjacency matrix.
inline GroupPartition components(const DatabaseSchema& schema) {
  const std::size_t n = schema.tables.size();
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  std::vector<bool> touched(n, false);
  auto index_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < n; ++i) {
      if (lower(schema.tables[i].name) == lower(name)) return i;
    }
    return n;
  };
  for (std::size_t i = 0; i < n; ++i) {
    reach[i][i] = true;
    for (const auto& fk : schema.tables[i].foreign_keys) {
      const std::size_t j = index_of(fk.to_table);
      reach[i][j] = reach[j][i] = true;
      touched[i] = touched[j] = true;
    }
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (reach[i][k] && reach[k][j]) reach[i][j] = true;

  GroupPartition out;
  std::vector<bool> placed(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (!touched[i]) {
      out.no_reference_tables.push_back(schema.tables[i].name);
      continue;
    }
    if (placed[i]) continue;
    CorrelationGroup g;
    g.group_id = out.reference_groups.size();
    for (std::size_t j = i; j < n; ++j) {
      if (reach[i][j]) {
        g.member_tables.push_back(schema.tables[j].name);
        placed[j] = true;
      }
    }
    out.reference_groups.push_back(g);
  }
  return out;
}

// Word + punctuation count via stream extraction.
inline std::size_t heuristic_count(const std::string& text) {
  static const std::string kPunct = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
  std::istringstream in(text);
  std::string word;
  std::size_t n = 0;
  while (in >> word) {
    n += 1 + static_cast<std::size_t>(std::count_if(word.begin(), word.end(), [](char c) {
           return kPunct.find(c) != std::string::npos;
         }));
  }
  return n;
}

inline std::string render(const TableDef& t) {
  std::string s = "table " + t.name;
  for (const auto& c : t.columns) {
    s += "\n  " + c.name;
    if (!c.type_name.empty()) s += " " + c.type_name;
    if (c.is_primary_key) s += " [PK]";
  }
  for (const auto& fk : t.foreign_keys) s += "\n  FK " + fk.from_column + " → " + fk.to_table + "." + fk.to_column;
  return s;
}

struct OracleSlice {
  std::vector<std::string> tables;
  std::string text;
  std::size_t tokens = 0;
};

// Greedy first-fit over an explicit table order, heuristic counter only.
// Returns an empty vector with `oversize` set when a table alone hits the budget.
inline std::vector<OracleSlice> greedy(const DatabaseSchema& schema, std::size_t slice_token, bool* oversize = nullptr) {
  const GroupPartition p = components(schema);
  std::vector<std::string> order;
  for (const auto& g : p.reference_groups) order.insert(order.end(), g.member_tables.begin(), g.member_tables.end());
  order.insert(order.end(), p.no_reference_tables.begin(), p.no_reference_tables.end());

  std::vector<OracleSlice> out;
  OracleSlice open;
  for (const auto& name : order) {
    const TableDef* t = nullptr;
    for (const auto& cand : schema.tables)
      if (cand.name == name) t = &cand;
    const std::string r = render(*t);
    if (heuristic_count(r) >= slice_token) {
      if (oversize) *oversize = true;
      return {};
    }
    const std::string joined = open.tables.empty() ? r : open.text + "\n\n" + r;
    if (heuristic_count(joined) < slice_token) {
      open.tables.push_back(name);
      open.text = joined;
    } else {
      out.push_back(open);
      open = OracleSlice{{name}, r, 0};
    }
  }
  if (!open.tables.empty()) out.push_back(open);
  for (auto& s : out) s.tokens = heuristic_count(s.text);
  return out;
}

struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;
  Fraction operator+(const Fraction& o) const {
    Fraction r{num * o.den + o.num * den, den * o.den};
    const std::int64_t g = std::gcd(r.num, r.den);
    return {r.num / g, r.den / g};
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

struct MetricsOracle {
  Fraction total, filtered, precision, recall;
  std::int64_t n = 0;
  double avg(const Fraction& f) const { return f.value() / static_cast<double>(n); }
};

inline MetricsOracle metrics(const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& pairs) {
  MetricsOracle m;
  for (const auto& [pv, gv] : pairs) {
    std::set<std::string> p, g;
    for (const auto& s : pv) p.insert(lower(s));
    for (const auto& s : gv) g.insert(lower(s));
    std::int64_t hit = 0;
    for (const auto& s : p) hit += g.count(s);
    const auto gi = static_cast<std::int64_t>(g.size());
    const auto pi = static_cast<std::int64_t>(p.size());
    m.total = m.total + Fraction{p == g ? 1 : 0, 1};
    m.filtered = m.filtered + Fraction{hit == gi ? 1 : 0, 1};
    m.precision = m.precision + (pi == 0 ? Fraction{gi == 0 ? 1 : 0, 1} : Fraction{hit, pi});
    m.recall = m.recall + (gi == 0 ? Fraction{1, 1} : Fraction{hit, gi});
    ++m.n;
  }
  return m;
}

}  // namespace lrsql::oracle
