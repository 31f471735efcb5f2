#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"

using namespace sigd2;

namespace {

Car rule(Itemset x, ClassId c, double conf, double ln_p) {
  Car r;
  r.antecedent = std::move(x);
  r.class_id = c;
  r.conf = conf;
  r.ln_p = ln_p;
  r.support_x = 10;
  r.support_xc = static_cast<std::int64_t>(conf * 10);
  return r;
}

std::set<std::pair<Itemset, ClassId>> keys(const std::vector<Car>& rules) {
  std::set<std::pair<Itemset, ClassId>> out;
  for (const auto& r : rules) out.insert({r.antecedent, r.class_id});
  return out;
}

bool includes(const std::set<std::pair<Itemset, ClassId>>& big, const std::set<std::pair<Itemset, ClassId>>& small) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

struct Case {
  Dataset data;
  std::vector<Transaction> mine_rows, prune_rows;
  std::vector<Car> rules;
};

Case random_case(std::mt19937_64& g) {
  Case c;
  c.data = oracle::random_dataset(g, 8, 9, 40, 2, 3);
  const auto plan = split_train_prune(c.data, g());
  const auto mine = c.data.subset(plan.train_indices);
  c.mine_rows = mine.transactions();
  c.prune_rows = c.data.subset(plan.prune_indices).transactions();
  MiningConfig mc;
  mc.alpha = 0.3;  // loose, to get longer rule lists on tiny data
  c.rules = generate_rules(mine, mc);
  return c;
}

}  // namespace

TEST(Stage1, EmptyRuleList) {
  const std::vector<Transaction> rows{{{0}, 0}};
  EXPECT_TRUE(stage1_database_coverage({}, rows, {}).empty());
}

TEST(Stage1, OneRuleCoversEverything) {
  const std::vector<Transaction> rows{{{0}, 0}, {{0, 1}, 0}, {{0, 2}, 0}};
  const std::vector<Car> rules{rule({0}, 0, 1.0, -3.0)};
  const auto mid = stage1_database_coverage(rules, rows, {});
  ASSERT_EQ(mid.size(), 1u);
  EXPECT_EQ(mid[0], rules[0]);
}

// Hand trace: A (dyn 3/3) is taken first and removes t0..t2; B then rises
// from 2/4 to 2/3 and passes 0.6; C sits at 0/1 and ends the loop.
TEST(Stage1, HandTraceDynamicConfidenceRises) {
  const std::vector<Transaction> rows{{{1}, 0}, {{1}, 0}, {{1, 2}, 0}, {{2}, 1},
                                      {{2}, 1}, {{2, 3}, 0}, {{3}, 0}};
  const Car A = rule({1}, 0, 0.9, -4.0), B = rule({2}, 1, 0.8, -5.0), C = rule({3}, 1, 0.95, -6.0);
  PruneConfig cfg;
  cfg.conf_threshold = 0.6;
  const auto mid = stage1_database_coverage(std::vector<Car>{C, B, A}, rows, cfg);
  ASSERT_EQ(mid.size(), 2u);
  EXPECT_EQ(mid[0], A);
  EXPECT_EQ(mid[1], B);
  // Without A's coverage B would stay at 0.5 and fail the threshold.
  const auto alone = stage1_database_coverage(std::vector<Car>{B, C}, rows, cfg);
  EXPECT_TRUE(alone.empty());
}

TEST(Stage1, ThresholdCheckedBeforeAdding) {
  const std::vector<Transaction> rows{{{0}, 0}, {{0}, 1}, {{0}, 1}};
  PruneConfig cfg;
  cfg.conf_threshold = 0.5;
  // dyn conf 1/3 < 0.5: nothing enters
  EXPECT_TRUE(stage1_database_coverage(std::vector<Car>{rule({0}, 0, 1.0, -2)}, rows, cfg).empty());
}

TEST(Stage1, UnmarkedTopRuleIsDiscardedWithoutCoverage) {
  // {5} never occurs: dyn conf 0, never selected even at threshold 0
  const std::vector<Transaction> rows{{{0}, 0}, {{1}, 1}};
  PruneConfig cfg;
  cfg.conf_threshold = 0.0;
  const auto mid = stage1_database_coverage(std::vector<Car>{rule({5}, 0, 1.0, -9), rule({1}, 1, 0.9, -1)}, rows, cfg);
  ASSERT_EQ(mid.size(), 1u);
  EXPECT_EQ(mid[0].antecedent, Itemset{1});
}

TEST(Stage1, CoverageRemovesRowsOfOtherClasses) {
  // A (2/3) goes before B (1/2) and removes t2 although t2 is class 1;
  // B is left with t3 alone, at 0/1.
  const std::vector<Transaction> rows{{{0}, 0}, {{0}, 0}, {{0, 1}, 1}, {{1}, 0}};
  PruneConfig cfg;
  cfg.conf_threshold = 0.5;
  const auto mid = stage1_database_coverage(std::vector<Car>{rule({0}, 0, 0.9, -3), rule({1}, 1, 0.8, -2)}, rows, cfg);
  ASSERT_EQ(mid.size(), 1u);
  EXPECT_EQ(mid[0].antecedent, Itemset{0});
}

TEST(Stage1, TieOrders) {
  // Both rules have dynamic confidence 1. By mining confidence R1 wins, by
  // ln p R2 wins; whichever goes first covers the shared row.
  const std::vector<Transaction> rows{{{0, 1}, 0}};
  const Car r1 = rule({0}, 0, 1.0, -2.0), r2 = rule({1}, 0, 0.9, -8.0);
  PruneConfig cfg;
  EXPECT_EQ(stage1_database_coverage(std::vector<Car>{r1, r2}, rows, cfg), std::vector<Car>{r1});
  cfg.coverage_ties = CoverageTies::ln_p;
  EXPECT_EQ(stage1_database_coverage(std::vector<Car>{r1, r2}, rows, cfg), std::vector<Car>{r2});
}

TEST(Stage1, EmptyPruneSetIsAnError) {
  EXPECT_THROW(stage1_database_coverage(std::vector<Car>{rule({0}, 0, 1, -1)}, {}, {}), DataError);
  PruneConfig bad;
  bad.conf_threshold = 1.5;
  EXPECT_THROW(bad.validate(), DataError);
}

TEST(Stage2, EmptyMidGivesFallbackOnly) {
  const std::vector<Transaction> rows{{{0}, 0}};
  const auto m = stage2_instance_selection({}, rows, 1);
  EXPECT_TRUE(m.rules.empty());
  EXPECT_EQ(m.fallback_class, 1u);
}

TEST(Stage2, CountsEqualMatchesWhenDisjoint) {
  const std::vector<Transaction> rows{{{0}, 0}, {{0}, 0}, {{1}, 1}, {{2}, 1}};
  const std::vector<Car> mid{rule({0}, 0, 1.0, -3), rule({1}, 1, 1.0, -2)};
  const auto m = stage2_instance_selection(mid, rows, 0);
  ASSERT_EQ(m.rules.size(), 2u);
  EXPECT_EQ(m.rules[0].count, 2);
  EXPECT_EQ(m.rules[1].count, 1);
}

TEST(Stage2, HighestConfidenceRuleTakesTheRow) {
  const std::vector<Transaction> rows{{{0, 1}, 0}};
  const std::vector<Car> mid{rule({0}, 0, 0.8, -9), rule({1}, 0, 0.9, -1)};
  const auto m = stage2_instance_selection(mid, rows, 0);
  ASSERT_EQ(m.rules.size(), 1u);
  EXPECT_EQ(m.rules[0].antecedent, Itemset{1});
  EXPECT_EQ(m.rules[0].count, 1);
}

TEST(TwoStagePrune, AllBelowThresholdFallsBack) {
  const std::vector<Transaction> rows{{{0}, 1}, {{0}, 1}};
  const auto m = two_stage_prune(std::vector<Car>{rule({0}, 0, 1.0, -5)}, rows, {}, 1);
  EXPECT_TRUE(m.rules.empty());
  EXPECT_EQ(predict(m, Itemset{0}), 1u);
}

TEST(TwoStagePrune, MatchesReferenceInterpreter) {
  std::mt19937_64 g(314159);
  for (int rep = 0; rep < 120; ++rep) {
    const auto c = random_case(g);
    for (double thr : {0.0, 0.3, 0.5, 0.8}) {
      for (auto ties : {CoverageTies::train_conf_then_ln_p, CoverageTies::ln_p}) {
        for (auto rows : {SelectionRows::prune_set, SelectionRows::full_training}) {
          PruneConfig cfg{thr, rows, ties};
          auto selection = c.prune_rows;
          if (rows == SelectionRows::full_training) {
            selection = c.mine_rows;
            selection.insert(selection.end(), c.prune_rows.begin(), c.prune_rows.end());
          }
          const auto ref = oracle::reference_prune(c.rules, c.prune_rows, cfg, 0, selection);
          EXPECT_EQ(stage1_database_coverage(c.rules, c.prune_rows, cfg), ref.r_mid) << "case " << rep;
          EXPECT_EQ(two_stage_prune(c.rules, c.prune_rows, cfg, 0, c.mine_rows), ref.model) << "case " << rep;
        }
      }
    }
  }
}

// Synthetic rule lists with heavy ties in confidence and ln p.
TEST(TwoStagePrune, MatchesReferenceUnderTies) {
  std::mt19937_64 g(7);
  for (int rep = 0; rep < 150; ++rep) {
    const auto d = oracle::random_dataset(g, 5, 3, 20, 2, 3);
    std::vector<Car> rules;
    std::set<std::pair<Itemset, ClassId>> used;
    const int n_rules = 1 + static_cast<int>(g() % 15);
    for (int r = 0; r < n_rules; ++r) {
      Itemset x;
      for (ItemId i = 0; i < d.num_items(); ++i) {
        if (g() % 3 == 0) x.push_back(i);
      }
      if (x.empty()) x.push_back(static_cast<ItemId>(g() % d.num_items()));
      const ClassId c = static_cast<ClassId>(g() % d.num_classes());
      if (!used.insert({x, c}).second) continue;
      rules.push_back(rule(x, c, (1 + g() % 4) / 4.0, -1.0 - static_cast<double>(g() % 3)));
    }
    for (auto ties : {CoverageTies::train_conf_then_ln_p, CoverageTies::ln_p}) {
      PruneConfig cfg{0.4, SelectionRows::prune_set, ties};
      const auto ref = oracle::reference_prune(rules, d.transactions(), cfg, 1, d.transactions());
      EXPECT_EQ(two_stage_prune(rules, d.transactions(), cfg, 1), ref.model) << "case " << rep;
    }
  }
}

TEST(TwoStagePrune, Invariants) {
  std::mt19937_64 g(2718);
  for (int rep = 0; rep < 100; ++rep) {
    const auto c = random_case(g);
    PruneConfig cfg;
    const auto mid = stage1_database_coverage(c.rules, c.prune_rows, cfg);
    const auto model = two_stage_prune(c.rules, c.prune_rows, cfg, 0);
    EXPECT_TRUE(includes(keys(c.rules), keys(mid)));
    EXPECT_TRUE(includes(keys(mid), keys(model.rules)));
    EXPECT_LE(model.rules.size(), mid.size());
    EXPECT_LE(mid.size(), c.rules.size());

    // Replay: each selected rule classified some remaining row correctly.
    auto remaining = c.prune_rows;
    for (const auto& r : mid) {
      bool hit = false;
      std::vector<Transaction> keep;
      for (const auto& t : remaining) {
        const bool match = oracle::subset_of(r.antecedent, t.items);
        hit = hit || (match && t.class_id == r.class_id);
        if (!match) keep.push_back(t);
      }
      EXPECT_TRUE(hit);
      remaining = keep;
    }

    std::int64_t total = 0;
    for (const auto& r : model.rules) {
      EXPECT_GE(r.count, 1);
      EXPECT_LE(r.count, static_cast<std::int64_t>(c.prune_rows.size()));
      total += r.count;
    }
    EXPECT_LE(total, static_cast<std::int64_t>(c.prune_rows.size()));
    EXPECT_TRUE(std::is_sorted(model.rules.begin(), model.rules.end(), model_order));

    // Raising the threshold never enlarges R_mid.
    std::set<std::pair<Itemset, ClassId>> prev = keys(stage1_database_coverage(c.rules, c.prune_rows, {0.0}));
    for (double thr : {0.2, 0.4, 0.5, 0.6, 0.8, 1.0}) {
      const auto cur = keys(stage1_database_coverage(c.rules, c.prune_rows, {thr}));
      EXPECT_TRUE(includes(prev, cur)) << "threshold " << thr;
      prev = cur;
    }
  }
}

TEST(PrunedModel, TextRoundTripIsByteIdentical) {
  const auto d = oracle::load_csv("iris");
  const auto m = fit_sigd2(d, {}, 3);
  ASSERT_FALSE(m.rules.empty());
  const auto text = m.to_text();
  const auto back = PrunedModel::parse(text);
  EXPECT_EQ(back, m);
  EXPECT_EQ(back.to_text(), text);
  EXPECT_THROW(PrunedModel::parse("1 -> 0 ln_p=-1 conf=1 n_x=1 n_xc=1 count=1\n"), ParseError);
  EXPECT_THROW(PrunedModel::parse(""), ParseError);
}
