#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sigd2/core.hpp"

namespace sigd2 {

struct Transaction {
  Itemset items;  // strictly ascending
  ClassId class_id = 0;

  bool operator==(const Transaction&) const = default;
};

/// Immutable collection of discretized transactions over dense item and class
/// universes. `item_codes` / `class_codes` keep the identifiers the data was
/// read with, so results can be reported (and models written) in the caller's
/// id space.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::vector<Transaction> transactions, std::size_t num_items, std::size_t num_classes,
          std::vector<std::int64_t> item_codes, std::vector<std::int64_t> class_codes)
      : transactions_(std::move(transactions)),
        num_items_(num_items),
        num_classes_(num_classes),
        item_codes_(std::move(item_codes)),
        class_codes_(std::move(class_codes)) {
    if (item_codes_.size() != num_items_ || class_codes_.size() != num_classes_) {
      throw DataError("dataset: code tables do not match universe sizes");
    }
    item_support_.assign(num_items_, 0);
    class_support_.assign(num_classes_, 0);
    for (const auto& t : transactions_) {
      if (t.class_id >= num_classes_) throw DataError("dataset: class id out of range");
      for (std::size_t i = 0; i < t.items.size(); ++i) {
        if (t.items[i] >= num_items_) throw DataError("dataset: item id out of range");
        if (i > 0 && t.items[i - 1] >= t.items[i]) {
          throw DataError("dataset: transaction items must be strictly ascending");
        }
        ++item_support_[t.items[i]];
      }
      ++class_support_[t.class_id];
    }
  }

  const std::vector<Transaction>& transactions() const noexcept { return transactions_; }
  const Transaction& operator[](std::size_t i) const { return transactions_[i]; }
  std::size_t size() const noexcept { return transactions_.size(); }
  bool empty() const noexcept { return transactions_.empty(); }

  std::size_t num_items() const noexcept { return num_items_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  const std::vector<std::size_t>& item_support() const noexcept { return item_support_; }
  const std::vector<std::size_t>& class_support() const noexcept { return class_support_; }
  const std::vector<std::int64_t>& item_codes() const noexcept { return item_codes_; }
  const std::vector<std::int64_t>& class_codes() const noexcept { return class_codes_; }

  // Most frequent class; ties go to the smallest class id.
  ClassId majority_class() const noexcept {
    ClassId best = 0;
    for (ClassId c = 1; c < class_support_.size(); ++c) {
      if (class_support_[c] > class_support_[best]) best = c;
    }
    return best;
  }

  // Rows at `indices` (repeats allowed), over the same item/class universes.
  Dataset subset(std::span<const std::size_t> indices) const {
    std::vector<Transaction> rows;
    rows.reserve(indices.size());
    for (auto i : indices) rows.push_back(transactions_.at(i));
    return Dataset(std::move(rows), num_items_, num_classes_, item_codes_, class_codes_);
  }

  // One line per transaction in the original codes, class code last.
  void write(std::ostream& os) const {
    for (const auto& t : transactions_) {
      for (auto i : t.items) os << item_codes_[i] << ' ';
      os << class_codes_[t.class_id] << '\n';
    }
  }

  std::string to_text() const {
    std::ostringstream os;
    write(os);
    return os.str();
  }

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<Transaction> transactions_;
  std::size_t num_items_ = 0;
  std::size_t num_classes_ = 0;
  std::vector<std::size_t> item_support_;
  std::vector<std::size_t> class_support_;
  std::vector<std::int64_t> item_codes_;
  std::vector<std::int64_t> class_codes_;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    fn(line, ++line_no);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
}

inline std::int64_t parse_code(std::string_view tok, std::size_t line_no) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size() || v < 0) {
    throw ParseError("line " + std::to_string(line_no) + ": malformed token '" +
                     std::string(tok) + "'");
  }
  return v;
}

// Dense 0-based ids assigned in ascending code order.
inline std::map<std::int64_t, std::uint32_t> densify(std::vector<std::int64_t>& codes) {
  std::sort(codes.begin(), codes.end());
  codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
  std::map<std::int64_t, std::uint32_t> m;
  for (std::uint32_t i = 0; i < codes.size(); ++i) m.emplace(codes[i], i);
  return m;
}

}  // namespace detail

/// Reads the transaction format: one transaction per line, whitespace-separated
/// non-negative integers, class code last. Blank lines and `#` comments are
/// skipped; duplicate items collapse.
inline Dataset parse_transactions(std::string_view text) {
  std::vector<std::pair<std::vector<std::int64_t>, std::int64_t>> raw;
  detail::for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    auto toks = detail::split_ws(line);
    if (toks.empty() || toks.front().front() == '#') return;
    std::vector<std::int64_t> items;
    items.reserve(toks.size() - 1);
    for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
      items.push_back(detail::parse_code(toks[i], line_no));
    }
    raw.emplace_back(std::move(items), detail::parse_code(toks.back(), line_no));
  });
  if (raw.empty()) throw ParseError("transaction file contains no transactions");

  std::vector<std::int64_t> item_codes, class_codes;
  for (const auto& [items, cls] : raw) {
    item_codes.insert(item_codes.end(), items.begin(), items.end());
    class_codes.push_back(cls);
  }
  auto item_map = detail::densify(item_codes);
  auto class_map = detail::densify(class_codes);

  std::vector<Transaction> rows;
  rows.reserve(raw.size());
  for (const auto& [items, cls] : raw) {
    Transaction t;
    t.items.reserve(items.size());
    for (auto code : items) t.items.push_back(item_map.at(code));
    std::sort(t.items.begin(), t.items.end());
    t.items.erase(std::unique(t.items.begin(), t.items.end()), t.items.end());
    t.class_id = class_map.at(cls);
    rows.push_back(std::move(t));
  }
  const auto ni = item_codes.size(), nc = class_codes.size();
  return Dataset(std::move(rows), ni, nc, std::move(item_codes), std::move(class_codes));
}

/// Names behind the dense ids of a CSV-encoded dataset.
struct EncodingMap {
  std::vector<std::pair<std::string, std::string>> items;  // id -> (column, value)
  std::string class_column;
  std::vector<std::string> classes;  // id -> label

  // `item_id<TAB>column=value` lines, then `class_id<TAB>label` lines, each
  // section introduced by a `#` header line.
  void write(std::ostream& os) const {
    os << "# items\n";
    for (std::size_t i = 0; i < items.size(); ++i) {
      os << i << '\t' << items[i].first << '=' << items[i].second << '\n';
    }
    os << "# classes " << class_column << '\n';
    for (std::size_t c = 0; c < classes.size(); ++c) os << c << '\t' << classes[c] << '\n';
  }

  static EncodingMap read(std::string_view text) {
    EncodingMap m;
    bool in_classes = false;
    std::map<std::size_t, std::pair<std::string, std::string>> items;
    std::map<std::size_t, std::string> classes;
    detail::for_each_line(text, [&](std::string_view line, std::size_t line_no) {
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.empty()) return;
      if (line.starts_with("# items")) {
        in_classes = false;
        return;
      }
      if (line.starts_with("# classes")) {
        in_classes = true;
        auto rest = line.substr(9);
        if (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
        m.class_column = std::string(rest);
        return;
      }
      if (line.front() == '#') return;
      auto tab = line.find('\t');
      if (tab == std::string_view::npos) {
        throw ParseError("encoding map line " + std::to_string(line_no) + ": missing tab");
      }
      auto id = static_cast<std::size_t>(detail::parse_code(line.substr(0, tab), line_no));
      auto body = line.substr(tab + 1);
      if (in_classes) {
        classes[id] = std::string(body);
      } else {
        auto eq = body.find('=');
        if (eq == std::string_view::npos) {
          throw ParseError("encoding map line " + std::to_string(line_no) + ": expected column=value");
        }
        items[id] = {std::string(body.substr(0, eq)), std::string(body.substr(eq + 1))};
      }
    });
    for (auto& [id, kv] : items) {
      if (id != m.items.size()) throw ParseError("encoding map: item ids are not dense");
      m.items.push_back(std::move(kv));
    }
    for (auto& [id, label] : classes) {
      if (id != m.classes.size()) throw ParseError("encoding map: class ids are not dense");
      m.classes.push_back(std::move(label));
    }
    return m;
  }

  bool operator==(const EncodingMap&) const = default;
};

struct EncodedTable {
  Dataset dataset;
  EncodingMap map;
};

namespace detail {

inline std::vector<std::string> split_csv_row(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    auto cell = line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                   : comma - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '"')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '"')) cell.remove_suffix(1);
    cells.emplace_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace detail

/// Encodes a categorical CSV table (header row first). Each distinct
/// (column, value) pair becomes one item id and each class label one class
/// id, both in order of first appearance.
inline EncodedTable encode_csv(std::string_view text, std::string_view class_column) {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  detail::for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) return;
    auto cells = detail::split_csv_row(line);
    if (header.empty()) {
      header = std::move(cells);
      return;
    }
    if (cells.size() != header.size()) {
      throw ParseError("csv row " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " cells, got " +
                       std::to_string(cells.size()));
    }
    rows.push_back(std::move(cells));
  });
  if (header.empty()) throw ParseError("csv input is empty");
  auto class_it = std::find(header.begin(), header.end(), class_column);
  if (class_it == header.end()) {
    throw ParseError("csv: class column '" + std::string(class_column) + "' not found");
  }
  if (rows.empty()) throw ParseError("csv input has a header but no rows");
  const auto class_col = static_cast<std::size_t>(class_it - header.begin());

  EncodedTable out;
  out.map.class_column = std::string(class_column);
  std::map<std::pair<std::size_t, std::string>, ItemId> item_ids;
  std::map<std::string, ClassId> class_ids;
  std::vector<Transaction> txs;
  txs.reserve(rows.size());
  for (const auto& row : rows) {
    Transaction t;
    for (std::size_t col = 0; col < row.size(); ++col) {
      if (col == class_col) continue;
      auto [it, fresh] = item_ids.try_emplace({col, row[col]}, static_cast<ItemId>(item_ids.size()));
      if (fresh) out.map.items.emplace_back(header[col], row[col]);
      t.items.push_back(it->second);
    }
    std::sort(t.items.begin(), t.items.end());
    auto [cit, fresh] = class_ids.try_emplace(row[class_col], static_cast<ClassId>(class_ids.size()));
    if (fresh) out.map.classes.push_back(row[class_col]);
    t.class_id = cit->second;
    txs.push_back(std::move(t));
  }
  std::vector<std::int64_t> icodes(item_ids.size()), ccodes(class_ids.size());
  for (std::size_t i = 0; i < icodes.size(); ++i) icodes[i] = static_cast<std::int64_t>(i);
  for (std::size_t c = 0; c < ccodes.size(); ++c) ccodes[c] = static_cast<std::int64_t>(c);
  const auto ni = icodes.size(), nc = ccodes.size();
  out.dataset = Dataset(std::move(txs), ni, nc, std::move(icodes), std::move(ccodes));
  return out;
}

/// Encodes a CSV table against an existing map, so held-out rows share the
/// training ids. Cells the map has never seen become no item; an unknown
/// class label is an error.
inline Dataset encode_csv_with_map(std::string_view text, const EncodingMap& map) {
  std::vector<std::string> header;
  std::vector<Transaction> txs;
  std::size_t class_col = 0;
  std::map<std::pair<std::string, std::string>, ItemId> item_ids;
  for (ItemId i = 0; i < map.items.size(); ++i) item_ids.emplace(map.items[i], i);
  detail::for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) return;
    auto cells = detail::split_csv_row(line);
    if (header.empty()) {
      header = std::move(cells);
      auto it = std::find(header.begin(), header.end(), map.class_column);
      if (it == header.end()) throw ParseError("csv: class column '" + map.class_column + "' not found");
      class_col = static_cast<std::size_t>(it - header.begin());
      return;
    }
    if (cells.size() != header.size()) {
      throw ParseError("csv row " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                       " cells, got " + std::to_string(cells.size()));
    }
    Transaction t;
    for (std::size_t col = 0; col < cells.size(); ++col) {
      if (col == class_col) continue;
      if (auto it = item_ids.find({header[col], cells[col]}); it != item_ids.end()) t.items.push_back(it->second);
    }
    std::sort(t.items.begin(), t.items.end());
    auto c = std::find(map.classes.begin(), map.classes.end(), cells[class_col]);
    if (c == map.classes.end()) {
      throw ParseError("csv row " + std::to_string(line_no) + ": unknown class '" + cells[class_col] + "'");
    }
    t.class_id = static_cast<ClassId>(c - map.classes.begin());
    txs.push_back(std::move(t));
  });
  if (header.empty()) throw ParseError("csv input is empty");
  std::vector<std::int64_t> icodes(map.items.size()), ccodes(map.classes.size());
  for (std::size_t i = 0; i < icodes.size(); ++i) icodes[i] = static_cast<std::int64_t>(i);
  for (std::size_t c = 0; c < ccodes.size(); ++c) ccodes[c] = static_cast<std::int64_t>(c);
  const auto ni = icodes.size(), nc = ccodes.size();
  return Dataset(std::move(txs), ni, nc, std::move(icodes), std::move(ccodes));
}

struct SplitPlan {
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> prune_indices;
  std::uint64_t seed = 0;

  bool operator==(const SplitPlan&) const = default;
};

// Stream tags keep the different sampling routines on unrelated sequences
// even when they share a seed.
inline constexpr std::uint64_t kSplitStream = 0x5b1;
inline constexpr std::uint64_t kFoldStream = 0xf01d;
inline constexpr std::uint64_t kBootstrapStream = 0xb007;

/// Random 2:1 train/prune split: |prune| = floor(n/3), the rest is train.
inline SplitPlan split_train_prune(const Dataset& d, std::uint64_t seed) {
  if (d.size() < 3) throw DataError("split_train_prune: need at least 3 transactions");
  std::vector<std::size_t> perm(d.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng(seed, kSplitStream);
  rng.shuffle(perm);
  const std::size_t n_prune = d.size() / 3;
  SplitPlan plan;
  plan.seed = seed;
  plan.train_indices.assign(perm.begin(), perm.end() - static_cast<std::ptrdiff_t>(n_prune));
  plan.prune_indices.assign(perm.end() - static_cast<std::ptrdiff_t>(n_prune), perm.end());
  return plan;
}

struct Fold {
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

/// Stratified k-fold partition. Each class's shuffled members are dealt
/// round-robin, the deal continuing across classes, so per-class counts differ
/// by at most one between folds.
inline std::vector<Fold> stratified_kfold(const Dataset& d, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw DataError("stratified_kfold: k must be at least 2");
  if (k > d.size()) throw DataError("stratified_kfold: more folds than transactions");
  std::vector<std::vector<std::size_t>> by_class(d.num_classes());
  for (std::size_t i = 0; i < d.size(); ++i) by_class[d[i].class_id].push_back(i);

  Rng rng(seed, kFoldStream);
  std::vector<std::vector<std::size_t>> test(k);
  std::size_t next = 0;
  for (auto& members : by_class) {
    rng.shuffle(members);
    for (auto idx : members) {
      test[next].push_back(idx);
      next = (next + 1) % k;
    }
  }
  std::vector<std::size_t> owner(d.size());
  for (std::size_t f = 0; f < k; ++f) {
    std::sort(test[f].begin(), test[f].end());
    for (auto idx : test[f]) owner[idx] = f;
  }
  std::vector<Fold> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    folds[f].test_indices = std::move(test[f]);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (owner[i] != f) folds[f].train_indices.push_back(i);
    }
  }
  return folds;
}

/// n draws with replacement. Absent weights mean the uniform distribution;
/// both cases go through the same inverse-CDF sampler, so passing explicit
/// uniform weights reproduces the unweighted sample exactly.
inline Dataset bootstrap_sample(const Dataset& d, std::optional<std::span<const double>> weights,
                                std::uint64_t seed) {
  const std::size_t n = d.size();
  if (n == 0) throw DataError("bootstrap_sample: empty dataset");
  std::vector<double> w;
  if (weights) {
    if (weights->size() != n) throw DataError("bootstrap_sample: weight vector size mismatch");
    w.assign(weights->begin(), weights->end());
    long double total = 0;
    for (double x : w) {
      if (!(x >= 0.0) || !std::isfinite(x)) throw DataError("bootstrap_sample: negative weight");
      total += x;
    }
    if (total == 0) throw DataError("bootstrap_sample: all weights are zero");
    if (std::fabs(static_cast<double>(total) - 1.0) > 1e-9) {
      throw DataError("bootstrap_sample: weights must sum to 1");
    }
  } else {
    w.assign(n, 1.0 / static_cast<double>(n));
  }
  std::vector<long double> cdf(n);
  long double acc = 0;
  for (std::size_t i = 0; i < n; ++i) cdf[i] = (acc += w[i]);

  Rng rng(seed, kBootstrapStream);
  std::vector<std::size_t> picks(n);
  for (auto& p : picks) {
    const long double u = static_cast<long double>(rng.unit()) * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) {
      // u rounded up onto the total; take the last row with mass.
      p = n - 1;
      while (w[p] == 0.0) --p;
    } else {
      p = static_cast<std::size_t>(it - cdf.begin());
    }
  }
  return d.subset(picks);
}

}  // namespace sigd2
