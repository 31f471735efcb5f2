#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sigd2/core.hpp"
#include "sigd2/dataset.hpp"

namespace sigd2 {

inline double accuracy(std::span<const ClassId> predictions, std::span<const ClassId> truth) {
  if (predictions.size() != truth.size()) throw DataError("accuracy: length mismatch");
  if (predictions.empty()) throw DataError("accuracy: no predictions");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predictions[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

namespace detail {

// Lower series for P(a, x), valid for x < a + 1.
inline double gamma_p_series(double a, double x) {
  double sum = 1.0 / a, term = sum, ap = a;
  for (int i = 0; i < 10000; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-17) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) (modified Lentz), valid for x >= a + 1.
inline double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

/// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
inline double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw DataError("regularized_gamma_q: argument out of range");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_fraction(a, x);
}

inline double chi_square_upper_tail(double statistic, double dof) {
  return regularized_gamma_q(dof / 2.0, std::max(0.0, statistic) / 2.0);
}

inline double normal_two_sided_p(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

/// 1-based ranks, ties sharing their average rank. `descending` ranks the
/// largest value first.
inline std::vector<double> average_ranks(std::span<const double> values, bool descending) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return descending ? values[a] > values[b] : values[a] < values[b];
  });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Mean accuracy per (dataset, algorithm).
struct ComparisonTable {
  std::vector<std::string> datasets;
  std::vector<std::string> algorithms;
  std::vector<std::vector<double>> scores;  // [dataset][algorithm]

  void validate() const {
    if (scores.size() != datasets.size()) throw DataError("comparison table: row count mismatch");
    for (const auto& row : scores) {
      if (row.size() != algorithms.size()) throw DataError("comparison table: ragged row");
      for (double v : row) {
        if (!std::isfinite(v)) throw DataError("comparison table: non-finite cell");
      }
    }
  }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> out;
    for (const auto& row : scores) out.push_back(row.at(j));
    return out;
  }

  std::size_t algorithm_index(std::string_view name) const {
    auto it = std::find(algorithms.begin(), algorithms.end(), name);
    if (it == algorithms.end()) throw DataError("comparison table: no column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - algorithms.begin());
  }

  /// Tab-separated: header `dataset<TAB>algo...`, then one row per dataset.
  /// Blank lines and `#` comments are skipped.
  static ComparisonTable parse_tsv(std::string_view text) {
    ComparisonTable t;
    bool header = false;
    detail::for_each_line(text, [&](std::string_view line, std::size_t line_no) {
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.empty() || line.front() == '#') return;
      std::vector<std::string_view> cells;
      std::size_t start = 0;
      while (true) {
        auto tab = line.find('\t', start);
        cells.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
      }
      if (!header) {
        if (cells.size() < 2) throw ParseError("comparison table: header needs at least one algorithm");
        for (std::size_t j = 1; j < cells.size(); ++j) t.algorithms.emplace_back(cells[j]);
        header = true;
        return;
      }
      if (cells.size() != t.algorithms.size() + 1) {
        throw ParseError("comparison table line " + std::to_string(line_no) + ": wrong number of cells");
      }
      t.datasets.emplace_back(cells[0]);
      std::vector<double> row;
      for (std::size_t j = 1; j < cells.size(); ++j) {
        std::string s(cells[j]);
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size()) {
          throw ParseError("comparison table line " + std::to_string(line_no) + ": bad number '" + s + "'");
        }
        row.push_back(v);
      }
      t.scores.push_back(std::move(row));
    });
    if (!header) throw ParseError("comparison table is empty");
    return t;
  }
};

struct FriedmanResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t dof = 0;
  std::vector<double> mean_ranks;  // per algorithm, 1 = best
};

/// Friedman test over datasets (rows) and algorithms (columns); higher
/// scores rank better.
inline FriedmanResult friedman_test(const ComparisonTable& t) {
  t.validate();
  const std::size_t N = t.datasets.size(), k = t.algorithms.size();
  if (N < 2) throw DataError("friedman_test: need at least two datasets");
  if (k < 2) throw DataError("friedman_test: need at least two algorithms");
  FriedmanResult r;
  r.mean_ranks.assign(k, 0.0);
  for (const auto& row : t.scores) {
    const auto ranks = average_ranks(row, true);
    for (std::size_t j = 0; j < k; ++j) r.mean_ranks[j] += ranks[j];
  }
  double sum_sq = 0.0;
  for (auto& m : r.mean_ranks) {
    m /= static_cast<double>(N);
    sum_sq += m * m;
  }
  const double kd = static_cast<double>(k), Nd = static_cast<double>(N);
  r.statistic = 12.0 * Nd / (kd * (kd + 1.0)) * (sum_sq - kd * (kd + 1.0) * (kd + 1.0) / 4.0);
  if (r.statistic < 0.0 && r.statistic > -1e-9) r.statistic = 0.0;
  r.dof = k - 1;
  r.p_value = chi_square_upper_tail(r.statistic, static_cast<double>(r.dof));
  return r;
}

struct WilcoxonResult {
  double z = 0.0;
  double p_value = 1.0;
  double r_plus = 0.0, r_minus = 0.0;
  std::size_t n = 0;  // non-zero differences
  std::size_t wins = 0, losses = 0, ties = 0;
};

/// Wilcoxon signed-ranks test of a against b: zero differences dropped,
/// tied magnitudes share ranks, T = min(R+, R-), normal approximation.
inline WilcoxonResult wilcoxon_signed_ranks(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("wilcoxon: length mismatch");
  WilcoxonResult r;
  std::vector<double> diff;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (a[i] > b[i]) {
      ++r.wins;
    } else if (a[i] < b[i]) {
      ++r.losses;
    } else {
      ++r.ties;
      continue;
    }
    diff.push_back(d);
  }
  if (diff.empty()) throw DataError("wilcoxon: no informative pairs");
  std::vector<double> mag(diff.size());
  for (std::size_t i = 0; i < diff.size(); ++i) mag[i] = std::fabs(diff[i]);
  const auto ranks = average_ranks(mag, false);
  for (std::size_t i = 0; i < diff.size(); ++i) (diff[i] > 0 ? r.r_plus : r.r_minus) += ranks[i];
  r.n = diff.size();
  const double n = static_cast<double>(r.n);
  const double T = std::min(r.r_plus, r.r_minus);
  r.z = (T - n * (n + 1.0) / 4.0) / std::sqrt(n * (n + 1.0) * (2.0 * n + 1.0) / 24.0);
  r.p_value = normal_two_sided_p(r.z);
  return r;
}

}  // namespace sigd2
