#pragma once

#include <cmath>
#include <cstdint>
#include <future>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "sigd2/classifier.hpp"
#include "sigd2/core.hpp"
#include "sigd2/dataset.hpp"
#include "sigd2/pruning.hpp"

namespace sigd2 {

enum class VoteMode { majority, weighted };

inline std::string_view to_string(VoteMode m) { return m == VoteMode::majority ? "majority" : "weighted"; }

struct WeightedLearner {
  PrunedModel model;
  double alpha = 1.0;

  bool operator==(const WeightedLearner&) const = default;
};

struct EnsembleModel {
  std::vector<WeightedLearner> learners;
  VoteMode mode = VoteMode::weighted;
  std::size_t num_classes = 0;
  Heuristic heuristic = Heuristic::S1;
  std::size_t eta = 0;

  bool operator==(const EnsembleModel&) const = default;

  std::size_t total_rules() const {
    std::size_t s = 0;
    for (const auto& l : learners) s += l.model.rules.size();
    return s;
  }

  void write(std::ostream& os, std::span<const std::int64_t> item_codes = {},
             std::span<const std::int64_t> class_codes = {}) const {
    os << "mode=" << to_string(mode) << " K=" << num_classes << " heuristic=" << to_string(heuristic)
       << " eta=" << eta << '\n';
    for (const auto& l : learners) {
      os << "alpha=" << format_double(l.alpha) << '\n';
      l.model.write(os, item_codes, class_codes);
    }
  }

  std::string to_text() const {
    std::ostringstream os;
    write(os);
    return os.str();
  }

  static EnsembleModel parse(std::string_view text) {
    EnsembleModel e;
    bool header = false;
    std::string block;
    auto flush = [&] {
      if (!block.empty()) e.learners.back().model = PrunedModel::parse(block);
      block.clear();
    };
    detail::for_each_line(text, [&](std::string_view line, std::size_t line_no) {
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.empty() || line.front() == '#') return;
      if (!header) {
        auto toks = detail::split_ws(line);
        if (toks.size() != 4 || !toks[0].starts_with("mode=") || !toks[1].starts_with("K=") ||
            !toks[2].starts_with("heuristic=") || !toks[3].starts_with("eta=")) {
          throw ParseError("line " + std::to_string(line_no) +
                           ": expected mode=<..> K=<int> heuristic=<..> eta=<int>");
        }
        const auto mode = toks[0].substr(5);
        if (mode == "majority") {
          e.mode = VoteMode::majority;
        } else if (mode == "weighted") {
          e.mode = VoteMode::weighted;
        } else {
          throw ParseError("line " + std::to_string(line_no) + ": unknown vote mode");
        }
        e.num_classes = static_cast<std::size_t>(detail::parse_code(toks[1].substr(2), line_no));
        e.heuristic = parse_heuristic(toks[2].substr(10));
        e.eta = static_cast<std::size_t>(detail::parse_code(toks[3].substr(4), line_no));
        header = true;
        return;
      }
      if (line.starts_with("alpha=")) {
        if (!e.learners.empty()) flush();
        e.learners.push_back({});
        e.learners.back().alpha = detail::parse_real(line.substr(6), line_no);
        return;
      }
      if (e.learners.empty()) throw ParseError("line " + std::to_string(line_no) + ": rule before alpha=");
      block.append(line);
      block.push_back('\n');
    });
    if (!header) throw ParseError("ensemble text has no header line");
    if (!e.learners.empty()) flush();
    return e;
  }
};

/// Plurality vote; ties go to the smallest class id.
inline ClassId acbag_predict(const EnsembleModel& e, std::span<const ItemId> instance,
                             bool use_counts = false) {
  if (e.learners.empty()) throw DataError("ensemble has no learners");
  std::map<ClassId, std::size_t> votes;
  for (const auto& l : e.learners) {
    ++votes[predict(l.model, instance, PredictOptions{e.heuristic, use_counts})];
  }
  ClassId best = votes.begin()->first;
  for (const auto& [c, v] : votes) {
    if (v > votes[best]) best = c;
  }
  return best;
}

/// argmax_c of the summed alpha of learners voting c; ties to the smallest id.
inline ClassId acboost_predict(const EnsembleModel& e, std::span<const ItemId> instance,
                               bool use_counts = false) {
  if (e.learners.empty()) throw DataError("ensemble has no learners");
  std::map<ClassId, double> score;
  for (const auto& l : e.learners) {
    score[predict(l.model, instance, PredictOptions{e.heuristic, use_counts})] += l.alpha;
  }
  ClassId best = score.begin()->first;
  for (const auto& [c, s] : score) {
    if (s > score[best]) best = c;
  }
  return best;
}

inline ClassId predict(const EnsembleModel& e, std::span<const ItemId> instance, bool use_counts = false) {
  return e.mode == VoteMode::majority ? acbag_predict(e, instance, use_counts)
                                      : acboost_predict(e, instance, use_counts);
}

/// ACbag: B members, each a wSigDirect fit on a uniform bootstrap sample;
/// member b uses seed + b for both its sample and its split. eta = 0 bags
/// unweakened SigD2 models.
inline EnsembleModel acbag_train(const Dataset& train, std::size_t bag_size, std::size_t eta,
                                 const LearnerConfig& cfg, std::uint64_t seed,
                                 Heuristic heuristic = Heuristic::S1) {
  if (bag_size < 1) throw DataError("acbag: bag size must be at least 1");
  cfg.mining.validate();
  cfg.prune.validate();
  auto member = [&](std::size_t b) {
    const auto sample = bootstrap_sample(train, std::nullopt, seed + b);
    return fit_wsigdirect(sample, cfg, eta, seed + b);
  };

  EnsembleModel e;
  e.mode = VoteMode::majority;
  e.num_classes = train.num_classes();
  e.heuristic = heuristic;
  e.eta = eta;
  e.learners.resize(bag_size);
  const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  if (workers == 1) {
    for (std::size_t b = 0; b < bag_size; ++b) e.learners[b].model = member(b);
    return e;
  }
  // Members land in their own slot, so the schedule never changes the result.
  for (std::size_t start = 0; start < bag_size; start += workers) {
    std::vector<std::future<PrunedModel>> jobs;
    const std::size_t end = std::min(bag_size, start + workers);
    for (std::size_t b = start; b < end; ++b) jobs.push_back(std::async(std::launch::async, member, b));
    for (std::size_t b = start; b < end; ++b) e.learners[b].model = jobs[b - start].get();
  }
  return e;
}

struct BoostConfig {
  std::size_t n_estimators = 50;
  std::size_t eta = 10;
  double epsilon_floor = 1e-10;
  std::size_t max_resample_retries = 5;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_estimators < 1) throw DataError("acboost: n_estimators must be at least 1");
    if (eta < 1) throw DataError("acboost: eta must be at least 1");
    if (!(epsilon_floor > 0.0 && epsilon_floor < 0.5)) throw DataError("acboost: bad epsilon floor");
  }
};

/// One fitted candidate learner, accepted or not.
struct BoostAttempt {
  std::size_t round = 0;
  std::size_t attempt = 0;
  double err = 0.0;
  double alpha = 0.0;
  bool accepted = false;
  std::vector<double> weights_after;  // distribution after the update (accepted only)
};

inline double samme_alpha(double err, std::size_t num_classes) {
  return std::log((1.0 - err) / err) + std::log(static_cast<double>(num_classes) - 1.0);
}

// w_i *= exp(alpha) where missed, then normalize.
inline void samme_reweight(std::vector<double>& w, const std::vector<char>& missed, double alpha) {
  const double up = std::exp(alpha);
  long double total = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (missed[i]) w[i] *= up;
    total += w[i];
  }
  for (auto& x : w) x = static_cast<double>(x / total);
}

/// ACboost: SAMME over wSigDirect learners fitted on weighted resamples.
inline EnsembleModel acboost_train(const Dataset& train, const BoostConfig& cfg, const LearnerConfig& lcfg,
                                   Heuristic heuristic = Heuristic::S1,
                                   std::vector<BoostAttempt>* trace = nullptr) {
  cfg.validate();
  const std::size_t K = train.num_classes();
  if (K < 2) throw DataError("acboost: need at least two classes");
  if (train.empty()) throw DataError("acboost: empty training set");
  const std::size_t n = train.size();
  const double chance = static_cast<double>(K - 1) / static_cast<double>(K);

  EnsembleModel e;
  e.mode = VoteMode::weighted;
  e.num_classes = K;
  e.heuristic = heuristic;
  e.eta = cfg.eta;

  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  std::vector<char> missed(n);
  bool stop = false;
  for (std::size_t m = 0; m < cfg.n_estimators && !stop; ++m) {
    bool accepted = false;
    for (std::size_t attempt = 0; attempt <= cfg.max_resample_retries && !accepted; ++attempt) {
      const std::uint64_t s = derive_seed(cfg.seed, (static_cast<std::uint64_t>(m) << 8) | attempt);
      const auto sample = bootstrap_sample(train, std::span<const double>(w), s);
      auto model = fit_wsigdirect(sample, lcfg, cfg.eta, s);

      long double err_acc = 0;
      for (std::size_t i = 0; i < n; ++i) {
        missed[i] = predict(model, train[i].items, PredictOptions{heuristic}) != train[i].class_id;
        if (missed[i]) err_acc += w[i];
      }
      double err = static_cast<double>(err_acc);
      BoostAttempt rec{m, attempt, err, 0.0, false, {}};
      if (err >= chance) {
        if (trace) trace->push_back(std::move(rec));
        continue;
      }
      if (err < cfg.epsilon_floor) {
        err = cfg.epsilon_floor;
        stop = true;
      }
      const double alpha = samme_alpha(err, K);
      samme_reweight(w, missed, alpha);
      e.learners.push_back({std::move(model), alpha});
      accepted = true;
      if (trace) {
        rec.err = err;
        rec.alpha = alpha;
        rec.accepted = true;
        rec.weights_after = w;
        trace->push_back(std::move(rec));
      }
    }
    if (!accepted) stop = true;
  }
  if (e.learners.empty()) throw TrainingError("boosting failed to find weak learner better than chance");
  return e;
}

}  // namespace sigd2
