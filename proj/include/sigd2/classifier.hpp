#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sigd2/core.hpp"
#include "sigd2/dataset.hpp"
#include "sigd2/mining.hpp"
#include "sigd2/pruning.hpp"

namespace sigd2 {

// S1: sum of ln p (lowest wins). S2: sum of confidence (highest wins).
// S3: sum of ln p * confidence (lowest wins).
enum class Heuristic { S1, S2, S3 };

// How a class group is scored: by summing its matching rules, or only by its
// single best rule.
enum class Scoring { group_sum, best_rule };

inline std::string_view to_string(Heuristic h) {
  switch (h) {
    case Heuristic::S1: return "S1";
    case Heuristic::S2: return "S2";
    case Heuristic::S3: return "S3";
  }
  return "S1";
}

inline Heuristic parse_heuristic(std::string_view s) {
  if (s == "S1" || s == "s1") return Heuristic::S1;
  if (s == "S2" || s == "s2") return Heuristic::S2;
  if (s == "S3" || s == "s3") return Heuristic::S3;
  throw ParseError("unknown heuristic '" + std::string(s) + "'");
}

struct PredictOptions {
  Heuristic heuristic = Heuristic::S1;
  bool use_counts = false;
  Scoring scoring = Scoring::group_sum;
};

struct WeakenConfig {
  std::size_t eta = 10;

  void validate() const {
    if (eta < 1) throw DataError("weaken: eta must be at least 1");
  }
};

/// Matching rules per class, each group in model order.
using RuleGroups = std::map<ClassId, std::vector<const Car*>>;

inline RuleGroups match_rules(const PrunedModel& model, std::span<const ItemId> instance) {
  RuleGroups groups;
  for (const auto& r : model.rules) {
    if (contains_all(instance, r.antecedent)) groups[r.class_id].push_back(&r);
  }
  for (auto& [c, g] : groups) {
    std::stable_sort(g.begin(), g.end(), [](const Car* a, const Car* b) { return model_order(*a, *b); });
  }
  return groups;
}

namespace detail {

// Every heuristic is turned into "lower is better".
inline double rule_term(const Car& r, const PredictOptions& opt) {
  double v = 0.0;
  switch (opt.heuristic) {
    case Heuristic::S1: v = r.ln_p; break;
    case Heuristic::S2: v = -r.conf; break;
    case Heuristic::S3: v = r.ln_p * r.conf; break;
  }
  return opt.use_counts ? v * static_cast<double>(r.count) : v;
}

inline double best_term(const std::vector<const Car*>& g, const PredictOptions& opt) {
  double best = rule_term(*g.front(), opt);
  for (const Car* r : g) best = std::min(best, rule_term(*r, opt));
  return best;
}

}  // namespace detail

/// Class for `instance` (sorted item ids). No matching rule gives the
/// fallback class. Score ties go to the group with the better single rule,
/// then to the smaller class id.
inline ClassId predict(const PrunedModel& model, std::span<const ItemId> instance,
                       const PredictOptions& opt = {}) {
  const auto groups = match_rules(model, instance);
  if (groups.empty()) return model.fallback_class;
  bool first = true;
  ClassId best_class = 0;
  double best_score = 0, best_single = 0;
  for (const auto& [c, g] : groups) {
    double score = 0;
    if (opt.scoring == Scoring::group_sum) {
      for (const Car* r : g) score += detail::rule_term(*r, opt);
    } else {
      score = detail::best_term(g, opt);
    }
    const double single = detail::best_term(g, opt);
    if (first || score < best_score || (score == best_score && single < best_single)) {
      best_class = c;
      best_score = score;
      best_single = single;
      first = false;
    }
  }
  return best_class;
}

inline ClassId predict(const PrunedModel& model, std::span<const ItemId> instance, Heuristic h,
                       bool use_counts) {
  return predict(model, instance, PredictOptions{h, use_counts, Scoring::group_sum});
}

/// wSigDirect: the top eta rules of every class group.
inline PrunedModel weaken(const PrunedModel& model, const WeakenConfig& cfg) {
  cfg.validate();
  std::vector<Car> sorted = model.rules;
  std::stable_sort(sorted.begin(), sorted.end(), model_order);
  std::map<ClassId, std::size_t> taken;
  PrunedModel out;
  out.fallback_class = model.fallback_class;
  for (auto& r : sorted) {
    if (taken[r.class_id]++ < cfg.eta) out.rules.push_back(std::move(r));
  }
  return out;
}

/// Rewrites dense ids into the dataset's original codes, the id space used by
/// model files and the CLI.
inline PrunedModel to_codes(const PrunedModel& model, const Dataset& d) {
  auto code32 = [](std::int64_t v) {
    if (v < 0 || v > static_cast<std::int64_t>(UINT32_MAX)) {
      throw DataError("model export: code does not fit in 32 bits");
    }
    return static_cast<std::uint32_t>(v);
  };
  PrunedModel out = model;
  out.fallback_class = code32(d.class_codes().at(model.fallback_class));
  for (auto& r : out.rules) {
    for (auto& i : r.antecedent) i = code32(d.item_codes().at(i));
    std::sort(r.antecedent.begin(), r.antecedent.end());
    r.class_id = code32(d.class_codes().at(r.class_id));
  }
  std::sort(out.rules.begin(), out.rules.end(), model_order);
  return out;
}

/// Settings of one SigD2 fit.
struct LearnerConfig {
  MiningConfig mining;
  PruneConfig prune;
};

/// SigD2: 2:1 train/prune split, mine on the train part, two-stage pruning
/// on the prune part. Fallback is the majority class of `train`.
inline PrunedModel fit_sigd2(const Dataset& train, const LearnerConfig& cfg, std::uint64_t seed) {
  const auto plan = split_train_prune(train, seed);
  const auto mine_part = train.subset(plan.train_indices);
  const auto prune_part = train.subset(plan.prune_indices);
  const auto rules = generate_rules(mine_part, cfg.mining);
  return two_stage_prune(rules, prune_part.transactions(), cfg.prune, train.majority_class(),
                         mine_part.transactions());
}

/// Baseline without the coverage stage: mine on all of `train` and keep every
/// rule that instance-based selection credits on `train`.
inline PrunedModel fit_sigdirect(const Dataset& train, const LearnerConfig& cfg) {
  const auto rules = generate_rules(train, cfg.mining);
  return stage2_instance_selection(rules, train.transactions(), train.majority_class());
}

/// wSigDirect: SigD2 followed by weakening. eta = 0 skips weakening.
inline PrunedModel fit_wsigdirect(const Dataset& train, const LearnerConfig& cfg, std::size_t eta,
                                  std::uint64_t seed) {
  auto m = fit_sigd2(train, cfg, seed);
  return eta == 0 ? m : weaken(m, WeakenConfig{eta});
}

/// `(col = val) and (col = val) -> (class = label)  [conf=..., ln_p=..., count=...]`
inline std::string render_rule(const Car& r, const EncodingMap& map) {
  std::string out;
  for (std::size_t k = 0; k < r.antecedent.size(); ++k) {
    const auto id = r.antecedent[k];
    if (id >= map.items.size()) throw DataError("render: item id " + std::to_string(id) + " not in map");
    if (k) out += " and ";
    out += "(" + map.items[id].first + " = " + map.items[id].second + ")";
  }
  if (r.class_id >= map.classes.size()) {
    throw DataError("render: class id " + std::to_string(r.class_id) + " not in map");
  }
  char stats[96];
  std::snprintf(stats, sizeof stats, "  [conf=%.4f, ln_p=%.4f, count=%lld]", r.conf, r.ln_p,
                static_cast<long long>(r.count));
  out += " -> (" + (map.class_column.empty() ? std::string("class") : map.class_column) + " = " +
         map.classes[r.class_id] + ")" + stats;
  return out;
}

}  // namespace sigd2
