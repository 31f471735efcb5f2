#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sigd2/core.hpp"
#include "sigd2/mining.hpp"
#include "sigd2/significance.hpp"

namespace sigd2 {

// Rows the instance-selection stage scans.
enum class SelectionRows {
  prune_set,       // the held-out pruning rows (default)
  full_training,   // mining rows plus pruning rows
};

// How the coverage stage orders rules whose dynamic confidence ties.
enum class CoverageTies {
  train_conf_then_ln_p,  // mining-set confidence first (default)
  ln_p,                  // ln p only
};

struct PruneConfig {
  double conf_threshold = 0.5;
  SelectionRows selection_rows = SelectionRows::prune_set;
  CoverageTies coverage_ties = CoverageTies::train_conf_then_ln_p;

  void validate() const {
    if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0)) {
      throw DataError("prune: confidence threshold must lie in [0, 1]");
    }
  }
};

// Model order: confidence descending, ln p ascending, antecedent, class.
inline bool model_order(const Car& a, const Car& b) {
  if (a.conf != b.conf) return a.conf > b.conf;
  if (a.ln_p != b.ln_p) return a.ln_p < b.ln_p;
  if (a.antecedent != b.antecedent) return antecedent_less(a.antecedent, b.antecedent);
  return a.class_id < b.class_id;
}

/// Final rule list plus the class predicted when no rule matches.
struct PrunedModel {
  std::vector<Car> rules;
  ClassId fallback_class = 0;

  bool operator==(const PrunedModel&) const = default;

  // `fallback=<class>` followed by one rule line per rule.
  void write(std::ostream& os, std::span<const std::int64_t> item_codes = {},
             std::span<const std::int64_t> class_codes = {}) const {
    os << "fallback="
       << (class_codes.empty() ? static_cast<std::int64_t>(fallback_class) : class_codes[fallback_class])
       << '\n';
    for (const auto& r : rules) write_rule(os, r, item_codes, class_codes);
  }

  std::string to_text() const {
    std::ostringstream os;
    write(os);
    return os.str();
  }

  static PrunedModel parse(std::string_view text) {
    PrunedModel m;
    bool header = false;
    detail::for_each_line(text, [&](std::string_view line, std::size_t line_no) {
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.empty() || line.front() == '#') return;
      if (!header) {
        if (!line.starts_with("fallback=")) {
          throw ParseError("line " + std::to_string(line_no) + ": expected fallback=<class>");
        }
        m.fallback_class = detail::parse_id32(line.substr(9), line_no);
        header = true;
        return;
      }
      m.rules.push_back(parse_rule(line, line_no));
    });
    if (!header) throw ParseError("model text has no fallback line");
    return m;
  }
};

namespace detail {

// Coverage loop state: for each rule, which rows it matches; for each row,
// which rules match it. Dynamic counts are kept incrementally.
struct CoverIndex {
  std::vector<std::vector<std::uint32_t>> rows_of_rule;
  std::vector<std::vector<std::uint32_t>> rules_of_row;
  std::vector<std::int64_t> matched, correct;

  CoverIndex(std::span<const Car> rules, std::span<const Transaction> rows)
      : rows_of_rule(rules.size()), rules_of_row(rows.size()),
        matched(rules.size(), 0), correct(rules.size(), 0) {
    std::size_t universe = 0;
    for (const auto& t : rows) {
      if (!t.items.empty()) universe = std::max<std::size_t>(universe, t.items.back() + 1);
    }
    std::vector<TidSet> item_rows(universe, TidSet(rows.size()));
    for (std::uint32_t t = 0; t < rows.size(); ++t) {
      for (auto i : rows[t].items) item_rows[i].set(t);
    }
    for (std::uint32_t r = 0; r < rules.size(); ++r) {
      TidSet hit(rows.size());
      hit.set_all(rows.size());
      bool possible = true;
      for (auto i : rules[r].antecedent) {
        if (i >= universe) {
          possible = false;
          break;
        }
        hit.and_with(item_rows[i]);
      }
      if (!possible) continue;
      hit.for_each([&](std::size_t t) {
        rows_of_rule[r].push_back(static_cast<std::uint32_t>(t));
        rules_of_row[t].push_back(r);
        ++matched[r];
        correct[r] += rows[t].class_id == rules[r].class_id;
      });
    }
  }

  double dyn_conf(std::size_t r) const {
    return matched[r] == 0 ? 0.0 : static_cast<double>(correct[r]) / static_cast<double>(matched[r]);
  }
};

}  // namespace detail

/// First stage: database coverage over the pruning rows.
///
/// Each round re-scores the remaining rules by their confidence on the rows
/// still uncovered and takes the best one. Dynamic ties fall to the
/// mining-set confidence by default: once coverage has removed the
/// counterexamples, an impure high-support rule often ties at 1.0 with pure
/// ones, and its tiny ln p would otherwise win. Below the threshold the loop
/// stops. A rule that classifies at least one remaining row correctly joins
/// the result and removes every remaining row it matches, whatever the label.
/// Selected rules keep their mining-set statistics.
inline std::vector<Car> stage1_database_coverage(std::span<const Car> rules,
                                                 std::span<const Transaction> prune_rows,
                                                 const PruneConfig& cfg) {
  cfg.validate();
  if (prune_rows.empty()) throw DataError("stage1: pruning set is empty");
  detail::CoverIndex cover(rules, prune_rows);
  std::vector<char> row_alive(prune_rows.size(), 1);
  std::size_t rows_left = prune_rows.size();
  std::vector<std::uint32_t> working(rules.size());
  for (std::uint32_t r = 0; r < rules.size(); ++r) working[r] = r;

  auto better = [&](std::uint32_t a, std::uint32_t b) {
    const double ca = cover.dyn_conf(a), cb = cover.dyn_conf(b);
    if (ca != cb) return ca > cb;
    if (cfg.coverage_ties == CoverageTies::train_conf_then_ln_p && rules[a].conf != rules[b].conf) {
      return rules[a].conf > rules[b].conf;
    }
    if (rules[a].ln_p != rules[b].ln_p) return rules[a].ln_p < rules[b].ln_p;
    if (rules[a].antecedent != rules[b].antecedent) {
      return antecedent_less(rules[a].antecedent, rules[b].antecedent);
    }
    return rules[a].class_id < rules[b].class_id;
  };

  std::vector<Car> selected;
  while (!working.empty() && rows_left > 0) {
    auto top_it = std::min_element(working.begin(), working.end(), better);
    const auto top = *top_it;
    if (cover.dyn_conf(top) < cfg.conf_threshold) break;
    if (cover.correct[top] > 0) {
      selected.push_back(rules[top]);
      for (auto t : cover.rows_of_rule[top]) {
        if (!row_alive[t]) continue;
        row_alive[t] = 0;
        --rows_left;
        for (auto r : cover.rules_of_row[t]) {
          --cover.matched[r];
          cover.correct[r] -= prune_rows[t].class_id == rules[r].class_id;
        }
      }
    }
    working.erase(top_it);
  }
  return selected;
}

/// Second stage: instance-based selection. Each row credits the single
/// highest-confidence rule that matches it and predicts its label; credited
/// rules form the model, with their counts.
inline PrunedModel stage2_instance_selection(std::span<const Car> r_mid,
                                             std::span<const Transaction> rows,
                                             ClassId fallback_class) {
  std::vector<std::int64_t> counts(r_mid.size(), 0);
  for (const auto& t : rows) {
    std::size_t best = r_mid.size();
    for (std::size_t r = 0; r < r_mid.size(); ++r) {
      if (r_mid[r].class_id != t.class_id || !contains_all(t.items, r_mid[r].antecedent)) continue;
      if (best == r_mid.size() || model_order(r_mid[r], r_mid[best])) best = r;
    }
    if (best != r_mid.size()) ++counts[best];
  }
  PrunedModel m;
  m.fallback_class = fallback_class;
  for (std::size_t r = 0; r < r_mid.size(); ++r) {
    if (counts[r] == 0) continue;
    m.rules.push_back(r_mid[r]);
    m.rules.back().count = counts[r];
  }
  std::sort(m.rules.begin(), m.rules.end(), model_order);
  return m;
}

/// Both stages. `mining_rows` is only read when the selection stage is
/// configured to scan the full training data.
inline PrunedModel two_stage_prune(std::span<const Car> rules, std::span<const Transaction> prune_rows,
                                   const PruneConfig& cfg, ClassId fallback_class,
                                   std::span<const Transaction> mining_rows = {}) {
  auto r_mid = stage1_database_coverage(rules, prune_rows, cfg);
  if (cfg.selection_rows == SelectionRows::prune_set) {
    return stage2_instance_selection(r_mid, prune_rows, fallback_class);
  }
  std::vector<Transaction> all(mining_rows.begin(), mining_rows.end());
  all.insert(all.end(), prune_rows.begin(), prune_rows.end());
  return stage2_instance_selection(r_mid, all, fallback_class);
}

}  // namespace sigd2
