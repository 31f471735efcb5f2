#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sigd2/core.hpp"
#include "sigd2/dataset.hpp"
#include "sigd2/significance.hpp"

namespace sigd2 {

/// Class association rule X -> c with its statistics on the mining set.
struct Car {
  Itemset antecedent;  // sorted, non-empty
  ClassId class_id = 0;
  double ln_p = 0.0;
  double conf = 0.0;
  std::int64_t support_x = 0;
  std::int64_t support_xc = 0;
  std::int64_t count = 0;  // times selected during instance-based pruning

  bool same_rule(const Car& o) const noexcept {
    return class_id == o.class_id && antecedent == o.antecedent;
  }
  bool operator==(const Car&) const = default;
};

struct MiningConfig {
  double alpha = 0.05;
  std::optional<std::size_t> max_antecedent_len;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("mining: alpha must lie in (0, 1)");
    if (max_antecedent_len && *max_antecedent_len == 0) {
      throw DataError("mining: max antecedent length must be positive");
    }
  }
};

inline bool antecedent_less(const Itemset& a, const Itemset& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// Mining output order: ln p ascending, then antecedent, then class.
inline bool mined_order(const Car& a, const Car& b) {
  if (a.ln_p != b.ln_p) return a.ln_p < b.ln_p;
  if (a.antecedent != b.antecedent) return antecedent_less(a.antecedent, b.antecedent);
  return a.class_id < b.class_id;
}

/// Items that cannot appear in any significant rule: for every class the
/// best-case p-value at the item's support is already >= alpha.
inline std::vector<ItemId> impossible_items(const Dataset& d, const MiningConfig& cfg) {
  cfg.validate();
  const double ln_alpha = std::log(cfg.alpha);
  const auto n = static_cast<std::int64_t>(d.size());
  std::vector<ItemId> out;
  for (ItemId i = 0; i < d.num_items(); ++i) {
    const auto s = static_cast<std::int64_t>(d.item_support()[i]);
    bool hopeless = true;
    for (ClassId c = 0; c < d.num_classes() && hopeless; ++c) {
      const auto nc = static_cast<std::int64_t>(d.class_support()[c]);
      if (pss_lower_bound(n, s, nc) < ln_alpha) hopeless = false;
    }
    if (hopeless) out.push_back(i);
  }
  return out;
}

/// Index of evaluated rules keyed by (class, antecedent).
class RuleIndex {
 public:
  void insert(ClassId c, Itemset antecedent, double ln_p) {
    index_[{c, std::move(antecedent)}] = ln_p;
  }
  std::optional<double> find(ClassId c, const Itemset& antecedent) const {
    auto it = index_.find({c, antecedent});
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t size() const noexcept { return index_.size(); }

 private:
  std::map<std::pair<ClassId, Itemset>, double> index_;
};

/// True iff some indexed rule with the same class and a proper, non-empty
/// subset of the candidate's antecedent has a strictly lower ln p.
/// Enumerates all 2^k - 2 subsets, so it is meant for short antecedents;
/// the miner carries the same minimum incrementally.
inline bool is_redundant(const Car& candidate, const RuleIndex& index) {
  const auto k = candidate.antecedent.size();
  if (k < 2) return false;
  if (k > 30) throw DataError("is_redundant: antecedent too long for subset enumeration");
  const std::uint64_t full = (std::uint64_t{1} << k) - 1;
  Itemset sub;
  for (std::uint64_t mask = 1; mask < full; ++mask) {
    sub.clear();
    for (std::size_t b = 0; b < k; ++b) {
      if (mask >> b & 1) sub.push_back(candidate.antecedent[b]);
    }
    if (auto p = index.find(candidate.class_id, sub); p && ln_p_less(*p, candidate.ln_p)) {
      return true;
    }
  }
  return false;
}

namespace detail {

class TidSet {
 public:
  TidSet() = default;
  explicit TidSet(std::size_t n) : words_((n + 63) / 64, 0) {}

  void set(std::size_t i) { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }

  std::int64_t count() const noexcept {
    std::int64_t c = 0;
    for (auto w : words_) c += std::popcount(w);
    return c;
  }

  std::int64_t count_and(const TidSet& o) const noexcept {
    std::int64_t c = 0;
    for (std::size_t i = 0; i < words_.size(); ++i) c += std::popcount(words_[i] & o.words_[i]);
    return c;
  }

  void set_all(std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) set(i);
  }

  void and_with(const TidSet& o) noexcept {
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= o.words_[i];
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      for (std::uint64_t bits = words_[w]; bits; bits &= bits - 1) {
        fn(w * 64 + static_cast<std::size_t>(std::countr_zero(bits)));
      }
    }
  }

  static TidSet intersect(const TidSet& a, const TidSet& b) {
    TidSet r;
    r.words_.resize(a.words_.size());
    for (std::size_t i = 0; i < a.words_.size(); ++i) r.words_[i] = a.words_[i] & b.words_[i];
    return r;
  }

 private:
  std::vector<std::uint64_t> words_;
};

// Per-class bookkeeping for one enumeration-tree node.
struct ClassState {
  bool evaluated = false;   // every proper subset was alive for this class
  bool expandable = false;  // some descendant may still be emitted
  double ln_p = 0.0;
  double min_subset_ln_p = std::numeric_limits<double>::infinity();
};

struct TreeNode {
  std::vector<std::uint32_t> ranks;  // positions in the support-ordered item list
  std::uint64_t key = 0;             // sum of per-rank hash values
  TidSet tids;
  std::int64_t support = 0;
  std::vector<ClassState> cls;
};

inline std::uint64_t rank_hash(std::uint32_t rank) { return mix_seed(0x9d2c5680u + rank); }

// Open-addressed map from node key to position in the level. Keys are
// additive, so a subset's key is the parent's key minus the dropped rank's
// hash; hits are confirmed against the actual ranks.
class LevelIndex {
 public:
  explicit LevelIndex(const std::vector<TreeNode>& level) : level_(level) {
    std::size_t cap = 16;
    while (cap < level.size() * 2) cap <<= 1;
    slots_.assign(cap, kEmpty);
    mask_ = cap - 1;
    for (std::uint32_t i = 0; i < level.size(); ++i) {
      std::size_t h = static_cast<std::size_t>(level[i].key) & mask_;
      while (slots_[h] != kEmpty) h = (h + 1) & mask_;
      slots_[h] = i;
    }
  }

  // Node equal to `ranks` without position `drop`, or nullptr.
  const TreeNode* find_without(const std::vector<std::uint32_t>& ranks, std::uint64_t key,
                               std::size_t drop) const {
    for (std::size_t h = static_cast<std::size_t>(key) & mask_; slots_[h] != kEmpty; h = (h + 1) & mask_) {
      const auto& node = level_[slots_[h]];
      if (node.key != key) continue;
      bool same = true;
      for (std::size_t j = 0, k = 0; j < ranks.size() && same; ++j) {
        if (j == drop) continue;
        same = node.ranks[k++] == ranks[j];
      }
      if (same) return &node;
    }
    return nullptr;
  }

 private:
  static constexpr std::uint32_t kEmpty = UINT32_MAX;
  const std::vector<TreeNode>& level_;
  std::vector<std::uint32_t> slots_;
  std::size_t mask_ = 0;
};

}  // namespace detail

/// Mines all significant, non-redundant class association rules.
///
/// Emitted: X -> c with p < alpha, no proper subset y having p(y -> c) strictly
/// below p(X -> c), and no proper subset y for which y -> c is already minimal
/// (confidence 1, so no refinement can lower its p-value; the subtree is not
/// enumerated).
///
/// The tree walks items in ascending support order, level by level. A node
/// stays expandable for class c only while some refinement could still be
/// emitted: the best refinement keeps the n_xc class-c rows and drops the
/// rest, so its p-value is bounded below by pss_lower_bound(n, n_xc, n_c).
/// That bound must beat alpha and must not exceed every subset's p-value.
/// A candidate is evaluated for c only if all its immediate subsets were
/// expandable for c, which also guarantees the redundancy minimum covers
/// every proper subset.
inline std::vector<Car> generate_rules(const Dataset& train, const MiningConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw DataError("generate_rules: empty training set");
  const auto n = static_cast<std::int64_t>(train.size());
  const std::size_t num_classes = train.num_classes();
  const double ln_alpha = std::log(cfg.alpha);

  std::size_t populated = 0;
  for (auto s : train.class_support()) populated += s > 0;
  if (populated < 2) return {};

  std::vector<std::int64_t> class_n(num_classes);
  std::vector<detail::TidSet> class_tids(num_classes, detail::TidSet(train.size()));
  std::vector<detail::TidSet> item_tids(train.num_items(), detail::TidSet(train.size()));
  for (std::size_t t = 0; t < train.size(); ++t) {
    class_tids[train[t].class_id].set(t);
    for (auto i : train[t].items) item_tids[i].set(t);
  }
  for (ClassId c = 0; c < num_classes; ++c) {
    class_n[c] = static_cast<std::int64_t>(train.class_support()[c]);
  }

  std::vector<char> excluded(train.num_items(), 0);
  for (auto i : impossible_items(train, cfg)) excluded[i] = 1;
  std::vector<ItemId> order;
  for (ItemId i = 0; i < train.num_items(); ++i) {
    if (!excluded[i] && train.item_support()[i] > 0) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](ItemId a, ItemId b) {
    return train.item_support()[a] < train.item_support()[b];
  });

  std::vector<Car> rules;

  auto evaluate = [&](detail::TreeNode& node, ClassId c, double min_sub) {
    auto& st = node.cls[c];
    const std::int64_t nxc = node.tids.count_and(class_tids[c]);
    st.evaluated = true;
    st.min_subset_ln_p = min_sub;
    st.ln_p = ln_fisher_p(n, node.support, class_n[c], nxc);
    const bool redundant = ln_p_less(min_sub, st.ln_p);
    if (ln_p_less(st.ln_p, ln_alpha) && !redundant) {
      Car r;
      r.antecedent.reserve(node.ranks.size());
      for (auto rk : node.ranks) r.antecedent.push_back(order[rk]);
      std::sort(r.antecedent.begin(), r.antecedent.end());
      r.class_id = c;
      r.ln_p = st.ln_p;
      r.support_x = node.support;
      r.support_xc = nxc;
      r.conf = static_cast<double>(nxc) / static_cast<double>(node.support);
      rules.push_back(std::move(r));
    }
    const bool pure = nxc == node.support;
    const double bound = pss_lower_bound(n, nxc, class_n[c]);
    const double best_known = std::min(st.ln_p, min_sub);
    st.expandable = !pure && bound < ln_alpha && !(best_known < bound - 2 * kLnPTieTolerance);
  };

  auto any_expandable = [](const detail::TreeNode& node) {
    return std::any_of(node.cls.begin(), node.cls.end(),
                       [](const detail::ClassState& s) { return s.expandable; });
  };

  std::vector<detail::TreeNode> level;
  for (std::uint32_t rk = 0; rk < order.size(); ++rk) {
    detail::TreeNode node;
    node.ranks = {rk};
    node.key = detail::rank_hash(rk);
    node.tids = item_tids[order[rk]];
    node.support = static_cast<std::int64_t>(train.item_support()[order[rk]]);
    node.cls.assign(num_classes, {});
    for (ClassId c = 0; c < num_classes; ++c) {
      evaluate(node, c, std::numeric_limits<double>::infinity());
    }
    if (any_expandable(node)) level.push_back(std::move(node));
  }

  std::size_t depth = 1;
  while (!level.empty() && (!cfg.max_antecedent_len || depth < *cfg.max_antecedent_len)) {
    const detail::LevelIndex lookup(level);

    std::vector<detail::TreeNode> next;
    std::vector<std::uint32_t> cand;
    std::vector<double> min_sub(num_classes);
    std::vector<char> alive(num_classes);
    for (std::size_t a = 0; a < level.size(); ++a) {
      const auto& left = level[a];
      for (std::size_t b = a + 1; b < level.size(); ++b) {
        const auto& right = level[b];
        if (!std::equal(left.ranks.begin(), left.ranks.end() - 1, right.ranks.begin())) break;

        bool any = false;
        for (ClassId c = 0; c < num_classes; ++c) {
          alive[c] = left.cls[c].expandable && right.cls[c].expandable;
          min_sub[c] = std::min({left.cls[c].ln_p, left.cls[c].min_subset_ln_p,
                                 right.cls[c].ln_p, right.cls[c].min_subset_ln_p});
          any = any || alive[c];
        }
        if (!any) continue;

        cand.assign(left.ranks.begin(), left.ranks.end());
        cand.push_back(right.ranks.back());
        const std::uint64_t key = left.key + detail::rank_hash(right.ranks.back());
        // The remaining immediate subsets drop one of the shared prefix ranks.
        for (std::size_t drop = 0; drop + 2 < cand.size() && any; ++drop) {
          const auto* sub = lookup.find_without(cand, key - detail::rank_hash(cand[drop]), drop);
          any = false;
          for (ClassId c = 0; c < num_classes; ++c) {
            if (!alive[c]) continue;
            if (!sub || !sub->cls[c].expandable) {
              alive[c] = 0;
              continue;
            }
            min_sub[c] = std::min({min_sub[c], sub->cls[c].ln_p, sub->cls[c].min_subset_ln_p});
            any = true;
          }
        }
        if (!any) continue;
        if (left.tids.count_and(right.tids) == 0) continue;

        detail::TreeNode child;
        child.ranks = cand;
        child.key = key;
        child.tids = detail::TidSet::intersect(left.tids, right.tids);
        child.support = child.tids.count();
        child.cls.assign(num_classes, {});
        for (ClassId c = 0; c < num_classes; ++c) {
          if (alive[c]) evaluate(child, c, min_sub[c]);
        }
        if (any_expandable(child)) next.push_back(std::move(child));
      }
    }
    level = std::move(next);
    ++depth;
  }

  std::vector<std::uint32_t> idx(rules.size());
  for (std::uint32_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
    return mined_order(rules[a], rules[b]);
  });
  std::vector<Car> sorted;
  sorted.reserve(rules.size());
  for (auto i : idx) sorted.push_back(std::move(rules[i]));
  return sorted;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// `i1 ... ik -> c ln_p=<v> conf=<v> n_x=<int> n_xc=<int> count=<int>`.
/// Code tables, when given, translate dense ids to the caller's codes.
inline void write_rule(std::ostream& os, const Car& r, std::span<const std::int64_t> item_codes = {},
                       std::span<const std::int64_t> class_codes = {}) {
  for (auto i : r.antecedent) {
    os << (item_codes.empty() ? static_cast<std::int64_t>(i) : item_codes[i]) << ' ';
  }
  os << "-> " << (class_codes.empty() ? static_cast<std::int64_t>(r.class_id) : class_codes[r.class_id])
     << " ln_p=" << format_double(r.ln_p) << " conf=" << format_double(r.conf)
     << " n_x=" << r.support_x << " n_xc=" << r.support_xc << " count=" << r.count << '\n';
}

namespace detail {

inline std::uint32_t parse_id32(std::string_view tok, std::size_t line_no) {
  const auto v = parse_code(tok, line_no);
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw ParseError("line " + std::to_string(line_no) + ": id exceeds 32 bits");
  }
  return static_cast<std::uint32_t>(v);
}

inline double parse_real(std::string_view tok, std::size_t line_no) {
  std::string s(tok);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ParseError("line " + std::to_string(line_no) + ": malformed number '" + s + "'");
  }
  return v;
}

}  // namespace detail

inline Car parse_rule(std::string_view line, std::size_t line_no = 0) {
  auto toks = detail::split_ws(line);
  auto arrow = std::find(toks.begin(), toks.end(), std::string_view("->"));
  if (arrow == toks.end() || arrow + 1 == toks.end()) {
    throw ParseError("line " + std::to_string(line_no) + ": rule line lacks '-> class'");
  }
  Car r;
  for (auto it = toks.begin(); it != arrow; ++it) r.antecedent.push_back(detail::parse_id32(*it, line_no));
  if (!std::is_sorted(r.antecedent.begin(), r.antecedent.end()) ||
      std::adjacent_find(r.antecedent.begin(), r.antecedent.end()) != r.antecedent.end()) {
    throw ParseError("line " + std::to_string(line_no) + ": antecedent must be strictly ascending");
  }
  r.class_id = detail::parse_id32(*(arrow + 1), line_no);
  int seen = 0;
  for (auto it = arrow + 2; it != toks.end(); ++it) {
    auto eq = it->find('=');
    if (eq == std::string_view::npos) throw ParseError("line " + std::to_string(line_no) + ": expected key=value");
    auto key = it->substr(0, eq), val = it->substr(eq + 1);
    if (key == "ln_p") {
      r.ln_p = detail::parse_real(val, line_no);
    } else if (key == "conf") {
      r.conf = detail::parse_real(val, line_no);
    } else if (key == "n_x") {
      r.support_x = detail::parse_code(val, line_no);
    } else if (key == "n_xc") {
      r.support_xc = detail::parse_code(val, line_no);
    } else if (key == "count") {
      r.count = detail::parse_code(val, line_no);
    } else {
      throw ParseError("line " + std::to_string(line_no) + ": unknown rule field '" + std::string(key) + "'");
    }
    ++seen;
  }
  if (seen != 5) throw ParseError("line " + std::to_string(line_no) + ": rule line needs 5 fields");
  return r;
}

}  // namespace sigd2
