#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sigd2/core.hpp"
#include "sigd2/dataset.hpp"

namespace sigd2 {

/// 2x2 table summary of rule X -> c over n transactions.
struct ContingencyCounts {
  std::int64_t n = 0;     // transactions
  std::int64_t n_x = 0;   // containing X
  std::int64_t n_c = 0;   // labelled c
  std::int64_t n_xc = 0;  // containing X and labelled c

  bool feasible() const noexcept {
    return n >= 0 && n_x >= 0 && n_c >= 0 && n_xc >= 0 && n_x <= n && n_c <= n &&
           n_xc <= std::min(n_x, n_c) && n_xc >= n_x + n_c - n;
  }

  bool operator==(const ContingencyCounts&) const = default;
};

// ln 0 stand-in. Finite, so sums and comparisons stay well defined.
inline constexpr double kLnZero = std::numeric_limits<double>::lowest();

// Two ln p-values closer than this are treated as equal. Exact p-values that
// coincide (e.g. mirror-image tables) can come out of different summation
// paths a few ulps apart.
inline constexpr double kLnPTieTolerance = 1e-9;

inline bool ln_p_less(double a, double b) noexcept { return a < b - kLnPTieTolerance; }

/// ln k! for k up to a fixed capacity, in extended precision. Larger
/// arguments fall back to lgammal.
class LogFactorialTable {
 public:
  explicit LogFactorialTable(std::size_t capacity) : table_(capacity + 1) {
    for (std::size_t k = 0; k <= capacity; ++k) {
      table_[k] = std::lgamma(static_cast<long double>(k) + 1.0L);
    }
  }

  long double operator()(std::int64_t k) const {
    const auto u = static_cast<std::size_t>(k);
    return u < table_.size() ? table_[u] : std::lgamma(static_cast<long double>(k) + 1.0L);
  }

  long double ln_choose(std::int64_t n, std::int64_t k) const {
    return (*this)(n) - (*this)(k) - (*this)(n - k);
  }

 private:
  std::vector<long double> table_;
};

inline const LogFactorialTable& log_factorials() {
  static const LogFactorialTable table(1u << 17);
  return table;
}

namespace detail {

// ln P(H = i) for H ~ Hypergeometric(n, n_c successes, n_x draws).
inline long double ln_hypergeom_term(std::int64_t n, std::int64_t n_x, std::int64_t n_c,
                                     std::int64_t i) {
  const auto& lf = log_factorials();
  return lf.ln_choose(n_c, i) + lf.ln_choose(n - n_c, n_x - i) - lf.ln_choose(n, n_x);
}

// Neumaier-compensated accumulator.
struct CompensatedSum {
  long double sum = 0, comp = 0;
  void add(long double x) {
    const long double t = sum + x;
    comp += std::fabs(sum) >= std::fabs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  long double value() const { return sum + comp; }
};

inline double clamp_ln_p(long double v) {
  return v > 0 ? 0.0 : static_cast<double>(v);
}

}  // namespace detail

/// ln of the upper-tail Fisher exact p-value,
/// P(H >= n_xc) with H ~ Hypergeometric(n, n_c, n_x).
///
/// Tail terms are summed in linear space relative to the largest one (the
/// term at max(n_xc, mode)), walking outward with the pmf ratio recurrence,
/// so only one log-factorial evaluation is needed.
inline double ln_fisher_p(const ContingencyCounts& cc) {
  if (!cc.feasible() || cc.n < 1) {
    throw DataError("ln_fisher_p: infeasible contingency counts");
  }
  const std::int64_t n = cc.n, nx = cc.n_x, nc = cc.n_c;
  const std::int64_t lo = cc.n_xc;
  const std::int64_t lowest_possible = std::max<std::int64_t>(0, nx + nc - n);
  const std::int64_t hi = std::min(nx, nc);
  if (lo <= lowest_possible) return 0.0;

  const std::int64_t mode = (nx + 1) * (nc + 1) / (n + 2);
  const std::int64_t start = std::max(lo, std::min(mode, hi));
  const std::int64_t rest = n - nc - nx;  // may be negative

  // ratio(i) = P(H = i+1) / P(H = i)
  auto ratio = [&](std::int64_t i) -> long double {
    return static_cast<long double>(nc - i) * static_cast<long double>(nx - i) /
           (static_cast<long double>(i + 1) * static_cast<long double>(rest + i + 1));
  };

  constexpr long double kNegligible = 1e-22L;
  detail::CompensatedSum acc;
  acc.add(1.0L);
  long double t = 1.0L;
  for (std::int64_t i = start; i < hi; ++i) {
    t *= ratio(i);
    acc.add(t);
    if (t < acc.value() * kNegligible) break;
  }
  t = 1.0L;
  for (std::int64_t i = start; i > lo; --i) {
    t /= ratio(i - 1);
    acc.add(t);
    if (t < acc.value() * kNegligible) break;
  }
  return detail::clamp_ln_p(detail::ln_hypergeom_term(n, nx, nc, start) + std::log(acc.value()));
}

inline double ln_fisher_p(std::int64_t n, std::int64_t n_x, std::int64_t n_c, std::int64_t n_xc) {
  return ln_fisher_p(ContingencyCounts{n, n_x, n_c, n_xc});
}

/// Smallest p-value any rule with antecedent support `n_x` can reach for a
/// class of size `n_c`: the fully pure table, prod_{i<n_x} (n_c-i)/(n-i).
///
/// Returns 0 for n_x = 0 and kLnZero when n_x > n_c (the product hits a zero
/// factor). Rules below a node only shrink its support, and the bound only
/// grows as support shrinks (for n_x <= n_c), so callers pass the best support
/// a refinement can keep.
inline double pss_lower_bound(std::int64_t n, std::int64_t n_x, std::int64_t n_c) {
  if (n < 0 || n_x < 0 || n_c < 0 || n_x > n || n_c > n) {
    throw DataError("pss_lower_bound: argument out of range");
  }
  if (n_x == 0) return 0.0;
  if (n_x > n_c) return kLnZero;
  return detail::clamp_ln_p(detail::ln_hypergeom_term(n, n_x, n_c, n_x));
}

inline double confidence(const ContingencyCounts& cc) {
  if (cc.n_x <= 0) throw DataError("confidence: antecedent has zero support");
  return static_cast<double>(cc.n_xc) / static_cast<double>(cc.n_x);
}

inline bool contains_all(std::span<const ItemId> items, std::span<const ItemId> antecedent) {
  return std::includes(items.begin(), items.end(), antecedent.begin(), antecedent.end());
}

/// Counts by direct subset test; an empty antecedent matches every row.
inline ContingencyCounts count_contingency(std::span<const Transaction> rows,
                                           std::span<const ItemId> antecedent, ClassId class_id) {
  ContingencyCounts cc;
  cc.n = static_cast<std::int64_t>(rows.size());
  for (const auto& t : rows) {
    const bool is_c = t.class_id == class_id;
    const bool has_x = contains_all(t.items, antecedent);
    cc.n_c += is_c;
    cc.n_x += has_x;
    cc.n_xc += is_c && has_x;
  }
  return cc;
}

inline ContingencyCounts count_contingency(const Dataset& d, std::span<const ItemId> antecedent,
                                           ClassId class_id) {
  return count_contingency(std::span<const Transaction>(d.transactions()), antecedent, class_id);
}

}  // namespace sigd2
