#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "oracles.hpp"

using namespace sigd2;

namespace {

Dataset from_rows(std::vector<Transaction> rows, std::size_t items, std::size_t classes) {
  std::vector<std::int64_t> ic(items), cc(classes);
  for (std::size_t i = 0; i < items; ++i) ic[i] = static_cast<std::int64_t>(i);
  for (std::size_t c = 0; c < classes; ++c) cc[c] = static_cast<std::int64_t>(c);
  return Dataset(std::move(rows), items, classes, ic, cc);
}

// Compares mined rules with the exhaustive oracle; returns a description of
// the first difference, or "".
std::string diff_against_oracle(const Dataset& d, double alpha, oracle::Rational alpha_exact) {
  MiningConfig cfg;
  cfg.alpha = alpha;
  const auto got = generate_rules(d, cfg);
  const auto want = oracle::exhaustive_rules(d, alpha_exact);
  std::map<std::pair<Itemset, ClassId>, const oracle::OracleRule*> expected;
  for (const auto& r : want) expected[{r.antecedent, r.class_id}] = &r;
  std::ostringstream os;
  std::set<std::pair<Itemset, ClassId>> seen;
  for (const auto& r : got) {
    auto key = std::make_pair(r.antecedent, r.class_id);
    if (!seen.insert(key).second) return "duplicate rule";
    auto it = expected.find(key);
    if (it == expected.end()) {
      os << "extra rule of size " << r.antecedent.size() << " -> " << r.class_id;
      return os.str();
    }
    const auto& o = *it->second;
    if (r.support_x != o.n_x || r.support_xc != o.n_xc) return "support mismatch";
    const double want_ln = static_cast<double>(std::log(o.p.value()));
    if (std::fabs(r.ln_p - want_ln) > 1e-11 * std::max(1.0, std::fabs(want_ln))) return "ln_p mismatch";
    if (r.conf != static_cast<double>(o.n_xc) / static_cast<double>(o.n_x)) return "conf mismatch";
  }
  if (seen.size() != expected.size()) {
    for (const auto& [key, r] : expected) {
      if (!seen.count(key)) {
        os << "missing rule of size " << key.first.size() << " -> " << key.second;
        return os.str();
      }
    }
  }
  return "";
}

}  // namespace

TEST(ImpossibleItems, Examples) {
  // single class, item everywhere: p_min = 1
  {
    std::vector<Transaction> rows(6, Transaction{{0}, 0});
    const auto d = from_rows(rows, 1, 1);
    EXPECT_EQ(impossible_items(d, {}), std::vector<ItemId>{0});
  }
  // support 1 in n = 1000, n_c = 500: p_min = 0.5
  {
    std::vector<Transaction> rows;
    for (int t = 0; t < 1000; ++t) rows.push_back({t == 0 ? Itemset{0} : Itemset{}, static_cast<ClassId>(t % 2)});
    const auto d = from_rows(rows, 1, 2);
    EXPECT_EQ(impossible_items(d, {}), std::vector<ItemId>{0});
  }
  // support 5 in n = 100, n_c = 50: p_min ~ 0.0281 < 0.05
  {
    std::vector<Transaction> rows;
    for (int t = 0; t < 100; ++t) rows.push_back({t < 5 ? Itemset{0} : Itemset{}, static_cast<ClassId>(t % 2)});
    const auto d = from_rows(rows, 1, 2);
    EXPECT_TRUE(impossible_items(d, {}).empty());
    const double p_min = 50.0 * 49 * 48 * 47 * 46 / (100.0 * 99 * 98 * 97 * 96);
    EXPECT_NEAR(p_min, 0.0281, 1e-4);
    EXPECT_NEAR(pss_lower_bound(100, 5, 50), std::log(p_min), 1e-12);
  }
}

TEST(GenerateRules, PerfectItemGivesOneOverSeventy) {
  std::vector<Transaction> rows;
  for (int t = 0; t < 8; ++t) rows.push_back({t < 4 ? Itemset{0} : Itemset{1}, static_cast<ClassId>(t < 4 ? 0 : 1)});
  const auto rules = generate_rules(from_rows(rows, 2, 2), {});
  const auto it = std::find_if(rules.begin(), rules.end(), [](const Car& r) {
    return r.antecedent == Itemset{0} && r.class_id == 0;
  });
  ASSERT_NE(it, rules.end());
  EXPECT_EQ(it->conf, 1.0);
  EXPECT_NEAR(it->ln_p, std::log(1.0 / 70.0), 1e-12);
}

TEST(GenerateRules, SingleClassGivesNothing) {
  std::vector<Transaction> rows{{{0, 1}, 0}, {{1}, 0}, {{0}, 0}};
  EXPECT_TRUE(generate_rules(from_rows(rows, 2, 1), {}).empty());
  // A second class with no rows changes nothing.
  EXPECT_TRUE(generate_rules(from_rows(rows, 2, 2), {}).empty());
}

TEST(GenerateRules, ErrorsAndConfig) {
  EXPECT_THROW(generate_rules(Dataset(), {}), DataError);
  MiningConfig bad;
  bad.alpha = 1.0;
  EXPECT_THROW(bad.validate(), DataError);
  bad.alpha = 0.0;
  EXPECT_THROW(bad.validate(), DataError);
  MiningConfig zero_len;
  zero_len.max_antecedent_len = 0;
  EXPECT_THROW(zero_len.validate(), DataError);
}

TEST(GenerateRules, MatchesExhaustiveOracle) {
  std::mt19937_64 g(20240601);
  for (int rep = 0; rep < 150; ++rep) {
    const auto d = oracle::random_dataset(g, 8, 2, 30, 2, 3);
    ASSERT_EQ(diff_against_oracle(d, 0.05, {1, 20}), "") << "dataset #" << rep << "\n" << d.to_text();
  }
}

TEST(GenerateRules, MatchesExhaustiveOracleAtLooseAlpha) {
  std::mt19937_64 g(99);
  for (int rep = 0; rep < 80; ++rep) {
    const auto d = oracle::random_dataset(g, 8, 2, 30, 2, 3);
    ASSERT_EQ(diff_against_oracle(d, 0.25, {1, 4}), "") << "dataset #" << rep << "\n" << d.to_text();
  }
}

TEST(GenerateRules, OutputInvariants) {
  std::mt19937_64 g(5);
  for (int rep = 0; rep < 60; ++rep) {
    const auto d = oracle::random_dataset(g, 8, 10, 30, 2, 3);
    const auto rules = generate_rules(d, {});
    std::set<std::pair<Itemset, ClassId>> keys;
    for (const auto& r : rules) {
      EXPECT_LT(r.ln_p, std::log(0.05));
      EXPECT_FALSE(r.antecedent.empty());
      EXPECT_TRUE(std::is_sorted(r.antecedent.begin(), r.antecedent.end()));
      EXPECT_LE(r.support_xc, r.support_x);
      EXPECT_EQ(r.conf, static_cast<double>(r.support_xc) / static_cast<double>(r.support_x));
      EXPECT_EQ(r.count, 0);
      EXPECT_TRUE(keys.insert({r.antecedent, r.class_id}).second);
      const auto cc = count_contingency(d, r.antecedent, r.class_id);
      EXPECT_EQ(cc.n_x, r.support_x);
      EXPECT_EQ(cc.n_xc, r.support_xc);
      // non-redundancy against every proper subset, evaluated directly
      const auto k = r.antecedent.size();
      for (std::uint32_t mask = 1; mask + 1 < (1u << k); ++mask) {
        Itemset y;
        for (std::size_t b = 0; b < k; ++b) {
          if (mask >> b & 1) y.push_back(r.antecedent[b]);
        }
        const auto cy = count_contingency(d, y, r.class_id);
        EXPECT_GE(ln_fisher_p(cy), r.ln_p - kLnPTieTolerance);
      }
    }
    EXPECT_TRUE(std::is_sorted(rules.begin(), rules.end(), mined_order));
    EXPECT_EQ(generate_rules(d, {}), rules);
  }
}

TEST(GenerateRules, MaxAntecedentLength) {
  std::mt19937_64 g(12);
  for (int rep = 0; rep < 30; ++rep) {
    const auto d = oracle::random_dataset(g, 8, 10, 30, 2, 3);
    MiningConfig cfg;
    cfg.max_antecedent_len = 2;
    const auto capped = generate_rules(d, cfg);
    std::vector<Car> want;
    for (const auto& r : generate_rules(d, {})) {
      if (r.antecedent.size() <= 2) want.push_back(r);
    }
    EXPECT_EQ(capped, want);
  }
}

TEST(IsRedundant, Examples) {
  RuleIndex idx;
  Car single{{3}, 0, -5.0, 1.0, 4, 4, 0};
  EXPECT_FALSE(is_redundant(single, idx));
  idx.insert(0, {3}, -5.0);
  Car pair{{3, 7}, 0, -5.0, 1.0, 4, 4, 0};
  EXPECT_FALSE(is_redundant(pair, idx));  // equal p is not redundant
  pair.ln_p = -4.0;
  EXPECT_TRUE(is_redundant(pair, idx));
  pair.class_id = 1;
  EXPECT_FALSE(is_redundant(pair, idx));  // other class
}

TEST(IsRedundant, ConstructedFromCounts) {
  // {0} -> 0 is pure on 4 of 8 rows; {0, 1} keeps only 2 of them.
  std::vector<Transaction> rows{{{0, 1}, 0}, {{0, 1}, 0}, {{0}, 0}, {{0}, 0},
                                {{1}, 1},    {{1}, 1},    {{}, 1},   {{}, 1}};
  const auto d = from_rows(rows, 2, 2);
  RuleIndex idx;
  const Itemset a{0}, ab{0, 1};
  idx.insert(0, a, ln_fisher_p(count_contingency(d, a, 0)));
  Car cand;
  cand.antecedent = ab;
  cand.class_id = 0;
  cand.ln_p = ln_fisher_p(count_contingency(d, ab, 0));
  EXPECT_TRUE(is_redundant(cand, idx));
}

TEST(RuleText, RoundTripsExactly) {
  const auto d = oracle::load_csv("iris");
  const auto rules = generate_rules(d, {});
  ASSERT_FALSE(rules.empty());
  for (const auto& r : rules) {
    std::ostringstream os;
    write_rule(os, r);
    const auto line = os.str();
    const auto back = parse_rule(line.substr(0, line.size() - 1));
    EXPECT_EQ(back, r);
    std::ostringstream again;
    write_rule(again, back);
    EXPECT_EQ(again.str(), line);
  }
}

TEST(RuleText, RejectsMalformedLines) {
  EXPECT_THROW(parse_rule("1 2 0 ln_p=-1 conf=1 n_x=1 n_xc=1 count=0"), ParseError);
  EXPECT_THROW(parse_rule("2 1 -> 0 ln_p=-1 conf=1 n_x=1 n_xc=1 count=0"), ParseError);
  EXPECT_THROW(parse_rule("1 -> 0 ln_p=-1 conf=1 n_x=1 count=0"), ParseError);
  EXPECT_THROW(parse_rule("1 -> 0 ln_p=abc conf=1 n_x=1 n_xc=1 count=0"), ParseError);
}

TEST(GenerateRules, RealDataDeterministic) {
  const auto d = oracle::load_csv("glass");
  const auto a = generate_rules(d, {});
  const auto b = generate_rules(d, {});
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a.empty());
}
