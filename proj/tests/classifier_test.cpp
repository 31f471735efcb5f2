#include <gtest/gtest.h>

#include <map>

#include "oracles.hpp"

using namespace sigd2;

namespace {

Car rule(Itemset x, ClassId c, double conf, double ln_p, std::int64_t count = 1) {
  Car r;
  r.antecedent = std::move(x);
  r.class_id = c;
  r.conf = conf;
  r.ln_p = ln_p;
  r.support_x = 10;
  r.support_xc = static_cast<std::int64_t>(conf * 10);
  r.count = count;
  return r;
}

PrunedModel model_of(std::vector<Car> rules, ClassId fallback) {
  PrunedModel m;
  m.rules = std::move(rules);
  std::sort(m.rules.begin(), m.rules.end(), model_order);
  m.fallback_class = fallback;
  return m;
}

}  // namespace

TEST(MatchRules, Examples) {
  const auto m = model_of({rule({0}, 0, 1, -3), rule({1, 2}, 1, 0.9, -2), rule({3}, 1, 0.8, -1)}, 0);
  EXPECT_TRUE(match_rules(m, Itemset{7}).empty());
  std::size_t total = 0;
  for (const auto& [c, g] : match_rules(m, Itemset{0, 1, 2, 3})) total += g.size();
  EXPECT_EQ(total, 3u);
  const auto groups = match_rules(m, Itemset{0, 3, 4});
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups.at(0).size(), 1u);
  EXPECT_EQ(groups.at(1).size(), 1u);
  EXPECT_EQ(groups.at(1)[0]->antecedent, Itemset{3});
}

TEST(MatchRules, BruteForceSubsetOracle) {
  std::mt19937_64 g(1);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<Car> rules;
    for (int r = 0; r < 6; ++r) {
      Itemset x;
      for (ItemId i = 0; i < 6; ++i) {
        if (g() % 3 == 0) x.push_back(i);
      }
      if (x.empty()) x.push_back(0);
      rules.push_back(rule(x, static_cast<ClassId>(g() % 3), (1 + g() % 4) / 4.0, -static_cast<double>(g() % 5)));
    }
    const auto m = model_of(rules, 0);
    Itemset inst;
    for (ItemId i = 0; i < 6; ++i) {
      if (g() % 2) inst.push_back(i);
    }
    std::map<ClassId, std::size_t> want;
    for (const auto& r : rules) {
      if (oracle::subset_of(r.antecedent, inst)) ++want[r.class_id];
    }
    std::map<ClassId, std::size_t> got;
    for (const auto& [c, grp] : match_rules(m, inst)) {
      got[c] = grp.size();
      for (std::size_t i = 1; i < grp.size(); ++i) EXPECT_FALSE(model_order(*grp[i], *grp[i - 1]));
    }
    EXPECT_EQ(got, want);
  }
}

TEST(Predict, SingleMatchAnyHeuristic) {
  const auto m = model_of({rule({0}, 2, 0.7, -3), rule({1}, 1, 0.9, -5)}, 0);
  for (auto h : {Heuristic::S1, Heuristic::S2, Heuristic::S3}) {
    for (bool counts : {false, true}) EXPECT_EQ(predict(m, Itemset{0}, h, counts), 2u);
  }
  EXPECT_EQ(predict(m, Itemset{9}, Heuristic::S1, false), 0u);
}

TEST(Predict, S1SumsLnP) {
  // class 0: -5 + -1 = -6; class 1: -4
  const auto m = model_of({rule({0}, 0, 0.6, -5), rule({1}, 0, 0.6, -1), rule({2}, 1, 0.6, -4)}, 1);
  EXPECT_EQ(predict(m, Itemset{0, 1, 2}, Heuristic::S1, false), 0u);
  // best single rule alone would still favour class 0 (-5 < -4)
  PredictOptions best{Heuristic::S1, false, Scoring::best_rule};
  EXPECT_EQ(predict(m, Itemset{0, 1, 2}, best), 0u);
  // with only the weak class-0 rule in play, class 1 wins
  EXPECT_EQ(predict(m, Itemset{1, 2}, Heuristic::S1, false), 1u);
}

TEST(Predict, HeuristicsCanDisagree) {
  // class 0: two rules conf 0.6 (S2 sum 1.2), ln p -2 each (S1 -4)
  // class 1: one rule conf 0.95, ln p -6 (S1 -6, S2 0.95)
  const auto m = model_of({rule({0}, 0, 0.6, -2), rule({1}, 0, 0.6, -2), rule({2}, 1, 0.95, -6)}, 0);
  const Itemset x{0, 1, 2};
  EXPECT_EQ(predict(m, x, Heuristic::S1, false), 1u);
  EXPECT_EQ(predict(m, x, Heuristic::S2, false), 0u);
  // S3: class 0 -1.2 - 1.2 = -2.4, class 1 -5.7
  EXPECT_EQ(predict(m, x, Heuristic::S3, false), 1u);
}

TEST(Predict, CountsWeightTerms) {
  // class 0: ln p -3, count 1; class 1: ln p -2, count 4
  const auto m = model_of({rule({0}, 0, 0.9, -3, 1), rule({1}, 1, 0.9, -2, 4)}, 0);
  EXPECT_EQ(predict(m, Itemset{0, 1}, Heuristic::S1, false), 0u);
  EXPECT_EQ(predict(m, Itemset{0, 1}, Heuristic::S1, true), 1u);
}

TEST(Predict, TiesGoToBetterSingleRuleThenSmallerClass) {
  // equal S1 sums (-4): class 1 has the single best rule (-3.5)
  const auto m = model_of({rule({0}, 0, 0.9, -2), rule({1}, 0, 0.9, -2), rule({2}, 1, 0.9, -3.5),
                           rule({3}, 1, 0.9, -0.5)},
                          0);
  EXPECT_EQ(predict(m, Itemset{0, 1, 2, 3}, Heuristic::S1, false), 1u);
  const auto flat = model_of({rule({0}, 2, 0.9, -2), rule({1}, 1, 0.9, -2)}, 0);
  EXPECT_EQ(predict(flat, Itemset{0, 1}, Heuristic::S1, false), 1u);
}

TEST(Predict, ScalingLnPLeavesS1AndS3Unchanged) {
  std::mt19937_64 g(77);
  for (int rep = 0; rep < 300; ++rep) {
    std::vector<Car> rules, scaled;
    // factors that keep every product and sum exact, so ties stay ties
    const double k = std::array<double, 5>{0.5, 2, 3, 5, 10}[g() % 5];
    for (int r = 0; r < 8; ++r) {
      Itemset x{static_cast<ItemId>(g() % 6)};
      if (g() % 2) x.push_back(6 + static_cast<ItemId>(g() % 3));
      const auto c = rule(x, static_cast<ClassId>(g() % 3), (1 + g() % 8) / 8.0,
                          -0.25 * static_cast<double>(1 + g() % 40), 1 + static_cast<std::int64_t>(g() % 3));
      rules.push_back(c);
      scaled.push_back(c);
      scaled.back().ln_p *= k;
    }
    const auto a = model_of(rules, 0), b = model_of(scaled, 0);
    Itemset inst;
    for (ItemId i = 0; i < 9; ++i) {
      if (g() % 2) inst.push_back(i);
    }
    for (auto h : {Heuristic::S1, Heuristic::S3}) {
      for (bool counts : {false, true}) {
        EXPECT_EQ(predict(a, inst, h, counts), predict(b, inst, h, counts));
      }
    }
  }
}

TEST(Predict, ReplayOnPruneRowsUnderS2) {
  const auto d = oracle::load_csv("iris");
  const auto plan = split_train_prune(d, 5);
  const auto rules = generate_rules(d.subset(plan.train_indices), {});
  const auto prune = d.subset(plan.prune_indices);
  const auto m = two_stage_prune(rules, prune.transactions(), {}, 0);
  std::size_t checked = 0;
  for (const auto& t : prune.transactions()) {
    const auto groups = match_rules(m, t.items);
    std::size_t matches = 0;
    const Car* only = nullptr;
    for (const auto& [c, g] : groups) {
      matches += g.size();
      if (!g.empty()) only = g.front();
    }
    if (matches != 1 || only->class_id != t.class_id) continue;
    EXPECT_EQ(predict(m, t.items, Heuristic::S2, false), t.class_id);
    ++checked;
  }
  EXPECT_GT(checked, 0u);
}

TEST(Weaken, Examples) {
  const auto m = model_of({rule({0}, 0, 1, -3), rule({1}, 0, 0.9, -2), rule({2}, 1, 0.8, -1)}, 1);
  EXPECT_EQ(weaken(m, {5}), m);
  const auto one = weaken(m, {1});
  ASSERT_EQ(one.rules.size(), 2u);
  EXPECT_EQ(one.fallback_class, 1u);
  EXPECT_THROW(weaken(m, {0}), DataError);
}

TEST(Weaken, TenRulesEtaThreeAgainstSortOracle) {
  std::mt19937_64 g(10);
  std::vector<Car> rules;
  for (ItemId i = 0; i < 10; ++i) {
    rules.push_back(rule({i}, i % 2, (1 + g() % 5) / 5.0, -static_cast<double>(1 + g() % 4)));
  }
  const auto m = model_of(rules, 0);
  const auto w = weaken(m, {3});
  ASSERT_EQ(w.rules.size(), 6u);
  for (ClassId c = 0; c < 2; ++c) {
    std::vector<Car> grp;
    for (const auto& r : rules) {
      if (r.class_id == c) grp.push_back(r);
    }
    std::sort(grp.begin(), grp.end(), [](const Car& a, const Car& b) {
      if (a.conf != b.conf) return a.conf > b.conf;
      if (a.ln_p != b.ln_p) return a.ln_p < b.ln_p;
      return a.antecedent < b.antecedent;
    });
    grp.resize(3);
    std::vector<Car> got;
    for (const auto& r : w.rules) {
      if (r.class_id == c) got.push_back(r);
    }
    EXPECT_EQ(got, grp);
  }
}

TEST(Weaken, SubsetAndGroupSizeProperty) {
  std::mt19937_64 g(3);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<Car> rules;
    for (ItemId i = 0; i < 20; ++i) {
      if (g() % 2) rules.push_back(rule({i}, static_cast<ClassId>(g() % 3), (1 + g() % 5) / 5.0, -1.0 * (g() % 7)));
    }
    const auto m = model_of(rules, 0);
    const std::size_t eta = 1 + g() % 6;
    const auto w = weaken(m, {eta});
    std::map<ClassId, std::size_t> per;
    for (const auto& r : w.rules) {
      ++per[r.class_id];
      EXPECT_NE(std::find(m.rules.begin(), m.rules.end(), r), m.rules.end());
    }
    for (const auto& [c, k] : per) EXPECT_LE(k, eta);
  }
}

TEST(ParseHeuristic, AcceptsBothCases) {
  EXPECT_EQ(parse_heuristic("s2"), Heuristic::S2);
  EXPECT_EQ(parse_heuristic("S3"), Heuristic::S3);
  EXPECT_THROW(parse_heuristic("s4"), ParseError);
}

TEST(ToCodes, RestoresOriginalIds) {
  const auto d = parse_transactions("10 20 5\n10 30 6\n10 20 5\n20 30 6\n10 20 5\n30 6\n");
  PrunedModel m;
  m.fallback_class = 1;
  m.rules.push_back(rule({0, 1}, 0, 1, -2));
  const auto out = to_codes(m, d);
  EXPECT_EQ(out.fallback_class, 6u);
  EXPECT_EQ(out.rules[0].antecedent, (Itemset{10, 20}));
  EXPECT_EQ(out.rules[0].class_id, 5u);
}

TEST(FitFunctions, PredictionIsDeterministic) {
  const auto d = oracle::load_csv("glass");
  const auto a = fit_sigd2(d, {}, 9), b = fit_sigd2(d, {}, 9);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.fallback_class, d.majority_class());
  const auto s = fit_sigdirect(d, {});
  for (const auto& r : s.rules) EXPECT_GE(r.count, 1);
  const auto w = fit_wsigdirect(d, {}, 2, 9);
  EXPECT_EQ(w, weaken(a, {2}));
  EXPECT_EQ(fit_wsigdirect(d, {}, 0, 9), a);
}
