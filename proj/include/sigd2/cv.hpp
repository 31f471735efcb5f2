#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sigd2/classifier.hpp"
#include "sigd2/core.hpp"
#include "sigd2/dataset.hpp"
#include "sigd2/ensemble.hpp"
#include "sigd2/stats.hpp"

namespace sigd2 {

enum class Algo { sigd2, sigdirect, wsigdirect, acbag, acboost };

inline std::string_view to_string(Algo a) {
  switch (a) {
    case Algo::sigd2: return "sigd2";
    case Algo::sigdirect: return "sigdirect";
    case Algo::wsigdirect: return "wsigdirect";
    case Algo::acbag: return "acbag";
    case Algo::acboost: return "acboost";
  }
  return "sigd2";
}

inline Algo parse_algo(std::string_view s) {
  for (Algo a : {Algo::sigd2, Algo::sigdirect, Algo::wsigdirect, Algo::acbag, Algo::acboost}) {
    if (s == to_string(a)) return a;
  }
  throw ParseError("unknown algorithm '" + std::string(s) + "'");
}

struct AlgoParams {
  LearnerConfig learner;
  PredictOptions predict;
  std::size_t eta = 10;
  std::size_t estimators = 50;
  std::size_t bag_size = 10;
  // Called with the attempt log of every boosting run, when set.
  std::function<void(const std::vector<BoostAttempt>&)> boost_trace;
};

/// A trained model of any algorithm, with the options it predicts with.
struct TrainedModel {
  Algo algo = Algo::sigd2;
  PrunedModel single;
  EnsembleModel ensemble;
  PredictOptions predict_opts;

  bool is_ensemble() const { return algo == Algo::acbag || algo == Algo::acboost; }

  ClassId predict(std::span<const ItemId> instance) const {
    return is_ensemble() ? sigd2::predict(ensemble, instance, predict_opts.use_counts)
                         : sigd2::predict(single, instance, predict_opts);
  }

  std::size_t n_rules() const { return is_ensemble() ? ensemble.total_rules() : single.rules.size(); }

  double rules_per_member() const {
    if (!is_ensemble()) return static_cast<double>(single.rules.size());
    return static_cast<double>(ensemble.total_rules()) / static_cast<double>(ensemble.learners.size());
  }
};

inline TrainedModel train_model(const Dataset& train, Algo algo, const AlgoParams& p, std::uint64_t seed) {
  TrainedModel m;
  m.algo = algo;
  m.predict_opts = p.predict;
  switch (algo) {
    case Algo::sigd2: m.single = fit_sigd2(train, p.learner, seed); break;
    case Algo::sigdirect: m.single = fit_sigdirect(train, p.learner); break;
    case Algo::wsigdirect: m.single = fit_wsigdirect(train, p.learner, p.eta, seed); break;
    case Algo::acbag:
      m.ensemble = acbag_train(train, p.bag_size, p.eta, p.learner, seed, p.predict.heuristic);
      break;
    case Algo::acboost: {
      BoostConfig bc;
      bc.n_estimators = p.estimators;
      bc.eta = p.eta;
      bc.seed = seed;
      std::vector<BoostAttempt> trace;
      m.ensemble = acboost_train(train, bc, p.learner, p.predict.heuristic, p.boost_trace ? &trace : nullptr);
      if (p.boost_trace) p.boost_trace(trace);
      break;
    }
  }
  return m;
}

struct FoldResult {
  std::size_t fold = 0;  // 1-based
  double accuracy = 0.0;
  std::size_t n_rules = 0;
  double rules_per_member = 0.0;
  double seconds = 0.0;
};

struct EvalReport {
  std::string dataset;
  std::string algo;
  std::vector<FoldResult> folds;
  std::string config;
  std::string selection = "fixed";
  bool timed = false;

  double mean_accuracy() const {
    double s = 0;
    for (const auto& f : folds) s += f.accuracy;
    return folds.empty() ? 0.0 : s / static_cast<double>(folds.size());
  }
  double mean_rules() const {
    double s = 0;
    for (const auto& f : folds) s += static_cast<double>(f.n_rules);
    return folds.empty() ? 0.0 : s / static_cast<double>(folds.size());
  }
  double mean_rules_per_member() const {
    double s = 0;
    for (const auto& f : folds) s += f.rules_per_member;
    return folds.empty() ? 0.0 : s / static_cast<double>(folds.size());
  }
  double total_seconds() const {
    double s = 0;
    for (const auto& f : folds) s += f.seconds;
    return s;
  }
};

inline std::string config_snapshot(Algo algo, const AlgoParams& p, std::size_t k, std::uint64_t seed) {
  std::ostringstream os;
  os << "algo=" << to_string(algo) << " alpha=" << format_double(p.learner.mining.alpha)
     << " conf_threshold=" << format_double(p.learner.prune.conf_threshold)
     << " stage2_rows=" << (p.learner.prune.selection_rows == SelectionRows::prune_set ? "prune" : "full")
     << " coverage_ties="
     << (p.learner.prune.coverage_ties == CoverageTies::train_conf_then_ln_p ? "conf" : "lnp")
     << " heuristic=" << to_string(p.predict.heuristic) << " use_counts=" << (p.predict.use_counts ? 1 : 0);
  if (algo == Algo::wsigdirect || algo == Algo::acbag || algo == Algo::acboost) os << " eta=" << p.eta;
  if (algo == Algo::acboost) os << " estimators=" << p.estimators;
  if (algo == Algo::acbag) os << " bag_size=" << p.bag_size;
  os << " folds=" << k << " stratified=1 seed=" << seed;
  return os.str();
}

namespace detail {

inline EvalReport start_report(std::string dataset_name, Algo algo, const AlgoParams& p, std::size_t k,
                               std::uint64_t seed, bool timed) {
  EvalReport rep;
  rep.dataset = std::move(dataset_name);
  rep.algo = std::string(to_string(algo));
  rep.config = config_snapshot(algo, p, k, seed);
  rep.timed = timed;
  return rep;
}

inline FoldResult score_fold(const Dataset& d, const Fold& fold, std::size_t f, const TrainedModel& model,
                             double seconds) {
  std::vector<ClassId> pred, truth;
  for (auto i : fold.test_indices) {
    pred.push_back(model.predict(d[i].items));
    truth.push_back(d[i].class_id);
  }
  FoldResult r;
  r.fold = f + 1;
  r.accuracy = accuracy(pred, truth);
  r.n_rules = model.n_rules();
  r.rules_per_member = model.rules_per_member();
  r.seconds = seconds;
  return r;
}

}  // namespace detail

/// Stratified k-fold evaluation. Fold f (1-based) trains with seed derive_seed(seed, f).
/// Wall time is measured only when `timed` is set, so untimed reports are
/// reproducible byte for byte.
inline EvalReport cross_validate(const Dataset& d, std::string dataset_name, Algo algo, const AlgoParams& p,
                                 std::size_t k, std::uint64_t seed, bool timed = false) {
  const auto folds = stratified_kfold(d, k, seed);
  auto rep = detail::start_report(std::move(dataset_name), algo, p, k, seed, timed);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto model = train_model(d.subset(folds[f].train_indices), algo, p, derive_seed(seed, f + 1));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.folds.push_back(detail::score_fold(d, folds[f], f, model, timed ? secs : 0.0));
  }
  return rep;
}

/// ACboost evaluated at several ensemble sizes from one training pass per
/// fold. Rounds are seeded by index, so the first m learners of a longer run
/// are exactly the run with m estimators. Reports follow `sizes` order.
inline std::vector<EvalReport> cross_validate_boost_sizes(const Dataset& d, const std::string& dataset_name,
                                                          const AlgoParams& p, std::vector<std::size_t> sizes,
                                                          std::size_t k, std::uint64_t seed,
                                                          bool timed = false) {
  if (sizes.empty()) throw DataError("cross_validate_boost_sizes: no ensemble sizes");
  const auto folds = stratified_kfold(d, k, seed);
  AlgoParams longest = p;
  longest.estimators = *std::max_element(sizes.begin(), sizes.end());
  std::vector<EvalReport> reps;
  for (auto m : sizes) {
    AlgoParams q = p;
    q.estimators = m;
    reps.push_back(detail::start_report(dataset_name, Algo::acboost, q, k, seed, timed));
  }
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto full = train_model(d.subset(folds[f].train_indices), Algo::acboost, longest, derive_seed(seed, f + 1));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (std::size_t s = 0; s < sizes.size(); ++s) {
      TrainedModel cut = full;
      if (cut.ensemble.learners.size() > sizes[s]) cut.ensemble.learners.resize(sizes[s]);
      reps[s].folds.push_back(detail::score_fold(d, folds[f], f, cut, timed ? secs : 0.0));
    }
  }
  return reps;
}

/// Candidate values for a grid sweep; an empty list keeps the base value.
struct SweepGrid {
  std::vector<std::size_t> etas;
  std::vector<std::size_t> estimators;
  std::vector<double> conf_thresholds;

  std::size_t size() const {
    return std::max<std::size_t>(1, etas.size()) * std::max<std::size_t>(1, estimators.size()) *
           std::max<std::size_t>(1, conf_thresholds.size());
  }
};

/// Runs every grid point on the same folds and keeps the best mean accuracy
/// (first in grid order on ties). The report is labelled as a sweep.
inline EvalReport sweep_cross_validate(const Dataset& d, const std::string& dataset_name, Algo algo,
                                       const AlgoParams& base, const SweepGrid& grid, std::size_t k,
                                       std::uint64_t seed, bool timed = false) {
  auto or_base = [](auto list, auto v) { return list.empty() ? decltype(list){v} : list; };
  const auto etas = or_base(grid.etas, base.eta);
  const auto ests = or_base(grid.estimators, base.estimators);
  const auto thrs = or_base(grid.conf_thresholds, base.learner.prune.conf_threshold);
  EvalReport best;
  bool have = false;
  auto consider = [&](EvalReport rep) {
    if (!have || rep.mean_accuracy() > best.mean_accuracy()) {
      best = std::move(rep);
      have = true;
    }
  };
  std::size_t n = 0;
  for (double thr : thrs) {
    for (auto eta : etas) {
      AlgoParams p = base;
      p.learner.prune.conf_threshold = thr;
      p.eta = eta;
      if (algo == Algo::acboost) {
        for (auto& rep : cross_validate_boost_sizes(d, dataset_name, p, ests, k, seed, timed)) {
          consider(std::move(rep));
          ++n;
        }
        continue;
      }
      for (auto est : ests) {
        p.estimators = est;
        consider(cross_validate(d, dataset_name, algo, p, k, seed, timed));
        ++n;
      }
    }
  }
  if (n > 1) best.selection = "sweep(best of " + std::to_string(n) + ")";
  return best;
}

namespace detail {

inline std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace detail

inline void write_tsv(std::ostream& os, const EvalReport& r) {
  os << "# " << r.config << " selection=" << r.selection << '\n';
  os << "dataset\talgo\tfold\taccuracy\tn_rules\tseconds\n";
  auto secs = [&](double s) { return r.timed ? format_double(s) : std::string("-"); };
  for (const auto& f : r.folds) {
    os << r.dataset << '\t' << r.algo << '\t' << f.fold << '\t' << format_double(f.accuracy) << '\t'
       << f.n_rules << '\t' << secs(f.seconds) << '\n';
  }
  os << r.dataset << '\t' << r.algo << "\tmean\t" << format_double(r.mean_accuracy()) << '\t'
     << format_double(r.mean_rules()) << '\t' << secs(r.total_seconds()) << '\n';
}

inline void write_json_lines(std::ostream& os, const EvalReport& r) {
  auto row = [&](const std::string& fold, double acc, double rules, double per_member, double secs) {
    nlohmann::ordered_json j;
    j["dataset"] = r.dataset;
    j["algo"] = r.algo;
    j["fold"] = fold;
    j["accuracy"] = acc;
    j["n_rules"] = rules;
    j["seconds"] = r.timed ? nlohmann::ordered_json(secs) : nlohmann::ordered_json(nullptr);
    j["n_rules_per_member"] = per_member;
    j["selection"] = r.selection;
    j["config"] = r.config;
    os << j.dump() << '\n';
  };
  for (const auto& f : r.folds) {
    row(std::to_string(f.fold), f.accuracy, static_cast<double>(f.n_rules), f.rules_per_member, f.seconds);
  }
  row("mean", r.mean_accuracy(), r.mean_rules(), r.mean_rules_per_member(), r.total_seconds());
}

// Accuracies in percent with 2 decimals.
inline void write_text(std::ostream& os, const EvalReport& r) {
  const bool ens = r.algo == "acbag" || r.algo == "acboost";
  os << "dataset: " << r.dataset << "  algo: " << r.algo << "  selection: " << r.selection << '\n';
  os << "config: " << r.config << '\n';
  os << "fold  accuracy  rules" << (ens ? "  rules/member" : "") << (r.timed ? "  seconds" : "") << '\n';
  auto line = [&](const std::string& fold, double acc, const std::string& rules, double per_member,
                  double secs) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-4s  %8s  %5s", fold.c_str(), detail::fixed2(100.0 * acc).c_str(),
                  rules.c_str());
    os << buf;
    if (ens) os << "  " << detail::fixed2(per_member);
    if (r.timed) os << "  " << detail::fixed2(secs);
    os << '\n';
  };
  for (const auto& f : r.folds) {
    line(std::to_string(f.fold), f.accuracy, std::to_string(f.n_rules), f.rules_per_member, f.seconds);
  }
  line("mean", r.mean_accuracy(), detail::fixed2(r.mean_rules()), r.mean_rules_per_member(), r.total_seconds());
}

}  // namespace sigd2
