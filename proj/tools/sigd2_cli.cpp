// Command-line front end: mine, train, predict, cv, compare, render-rules, encode.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sigd2/sigd2.hpp"

namespace {

using namespace sigd2;

enum Exit { kOk = 0, kUsage = 2, kData = 3, kTraining = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
}

bool is_csv(const std::string& path) { return path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0; }

std::string last_header_cell(const std::string& text) {
  auto cells = detail::split_csv_row(std::string_view(text).substr(0, text.find('\n')));
  if (cells.empty() || cells.back().empty()) throw ParseError("csv header is empty");
  std::string last = cells.back();
  if (!last.empty() && last.back() == '\r') last.pop_back();
  return last;
}

struct Loaded {
  Dataset data;
  std::optional<EncodingMap> map;
};

Loaded load_data(const std::string& path, const std::string& class_column) {
  const auto text = read_file(path);
  if (!is_csv(path)) return {parse_transactions(text), std::nullopt};
  auto enc = encode_csv(text, class_column.empty() ? last_header_cell(text) : class_column);
  return {std::move(enc.dataset), std::move(enc.map)};
}

template <typename T>
std::vector<T> parse_list(const std::string& flag, const std::string& raw) {
  std::vector<T> out;
  std::stringstream ss(raw);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::istringstream one(tok);
    T v{};
    if (!(one >> v) || !one.eof()) throw UsageError("--" + flag + ": bad value '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("--" + flag + ": empty value");
  return out;
}

template <typename T>
T parse_single(const std::string& flag, const std::string& raw) {
  auto v = parse_list<T>(flag, raw);
  if (v.size() != 1) throw UsageError("--" + flag + " takes a list only with `cv`");
  return v.front();
}

struct Flags {
  double alpha = 0.05;
  std::string conf_threshold = "0.5";
  std::string heuristic = "s1";
  bool use_counts = false;
  std::string scoring = "sum";
  std::string eta = "10";
  std::string estimators = "50";
  std::size_t bag_size = 10;
  std::string algo = "sigd2";
  std::size_t folds = 10;
  std::uint64_t seed = 1;
  std::string format = "text";
  std::string class_column;
  std::string stage2_rows = "prune";
  std::string coverage_ties = "conf";
  std::size_t max_len = 0;
  bool timing = false;

  AlgoParams params(bool allow_lists) const {
    AlgoParams p;
    p.learner.mining.alpha = alpha;
    if (max_len) p.learner.mining.max_antecedent_len = max_len;
    p.learner.prune.conf_threshold =
        allow_lists ? parse_list<double>("conf-threshold", conf_threshold).front()
                    : parse_single<double>("conf-threshold", conf_threshold);
    p.learner.prune.selection_rows = stage2_rows == "full" ? SelectionRows::full_training : SelectionRows::prune_set;
    p.learner.prune.coverage_ties = coverage_ties == "lnp" ? CoverageTies::ln_p : CoverageTies::train_conf_then_ln_p;
    p.predict.heuristic = parse_heuristic(heuristic);
    p.predict.use_counts = use_counts;
    p.predict.scoring = scoring == "best" ? Scoring::best_rule : Scoring::group_sum;
    p.eta = allow_lists ? parse_list<std::size_t>("eta", eta).front() : parse_single<std::size_t>("eta", eta);
    p.estimators = allow_lists ? parse_list<std::size_t>("estimators", estimators).front()
                               : parse_single<std::size_t>("estimators", estimators);
    p.bag_size = bag_size;
    p.learner.mining.validate();
    p.learner.prune.validate();
    return p;
  }
};

// Instances in the transaction format, read as raw codes (the id space of
// model files). `labeled` drops the trailing class token.
std::vector<Itemset> read_code_instances(const std::string& text, bool labeled) {
  std::vector<Itemset> out;
  detail::for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    auto toks = detail::split_ws(line);
    if (toks.empty() || toks.front().front() == '#') return;
    Itemset items;
    for (std::size_t i = 0; i + (labeled ? 1 : 0) < toks.size(); ++i) {
      items.push_back(detail::parse_id32(toks[i], line_no));
    }
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    out.push_back(std::move(items));
  });
  return out;
}

struct AnyModel {
  std::optional<PrunedModel> single;
  std::optional<EnsembleModel> ensemble;
};

AnyModel parse_model(const std::string& text) {
  std::string_view first;
  detail::for_each_line(text, [&](std::string_view line, std::size_t) {
    if (first.empty() && !line.empty() && line.front() != '#') first = line;
  });
  AnyModel m;
  if (first.starts_with("mode=")) {
    m.ensemble = EnsembleModel::parse(text);
  } else {
    m.single = PrunedModel::parse(text);
  }
  return m;
}

int cmd_mine(const Flags& f, const std::string& data_path, const std::string& out_path,
             const std::string& map_out) {
  auto loaded = load_data(data_path, f.class_column);
  const auto p = f.params(false);
  const auto rules = generate_rules(loaded.data, p.learner.mining);
  std::ostringstream os;
  for (const auto& r : rules) {
    write_rule(os, r, loaded.data.item_codes(), loaded.data.class_codes());
  }
  if (out_path.empty()) {
    std::cout << os.str();
  } else {
    write_file(out_path, os.str());
  }
  if (!map_out.empty()) {
    if (!loaded.map) throw UsageError("--map-out needs CSV input");
    std::ostringstream ms;
    loaded.map->write(ms);
    write_file(map_out, ms.str());
  }
  return kOk;
}

int cmd_train(const Flags& f, const std::string& data_path, const std::string& out_path,
              const std::string& map_out) {
  auto loaded = load_data(data_path, f.class_column);
  const auto p = f.params(false);
  const auto algo = parse_algo(f.algo);
  const auto model = train_model(loaded.data, algo, p, f.seed);
  std::ostringstream os;
  if (model.is_ensemble()) {
    model.ensemble.write(os, loaded.data.item_codes(), loaded.data.class_codes());
  } else {
    to_codes(model.single, loaded.data).write(os);
  }
  if (out_path.empty()) {
    std::cout << os.str();
  } else {
    write_file(out_path, os.str());
  }
  if (!map_out.empty()) {
    if (!loaded.map) throw UsageError("--map-out needs CSV input");
    std::ostringstream ms;
    loaded.map->write(ms);
    write_file(map_out, ms.str());
  }
  return kOk;
}

int cmd_predict(const Flags& f, const std::string& model_path, const std::string& data_path,
                const std::string& map_path, bool unlabeled) {
  const auto model = parse_model(read_file(model_path));
  const auto p = f.params(false);
  std::vector<Itemset> instances;
  std::vector<ClassId> truth;
  std::optional<EncodingMap> map;
  const auto text = read_file(data_path);
  if (is_csv(data_path)) {
    if (map_path.empty()) throw UsageError("CSV instances need --map from training");
    map = EncodingMap::read(read_file(map_path));
    const auto d = encode_csv_with_map(text, *map);
    for (const auto& t : d.transactions()) {
      instances.push_back(t.items);
      truth.push_back(t.class_id);
    }
  } else {
    instances = read_code_instances(text, !unlabeled);
  }
  std::ostringstream os;
  for (const auto& x : instances) {
    const ClassId c = model.ensemble ? predict(*model.ensemble, x, p.predict.use_counts)
                                     : predict(*model.single, x, p.predict);
    if (map) {
      if (c >= map->classes.size()) throw DataError("model class " + std::to_string(c) + " not in map");
      os << map->classes[c] << '\n';
    } else {
      os << c << '\n';
    }
  }
  std::cout << os.str();
  return kOk;
}

int cmd_cv(const Flags& f, const std::string& data_path, const std::string& name) {
  auto loaded = load_data(data_path, f.class_column);
  const auto base = f.params(true);
  const auto algo = parse_algo(f.algo);
  SweepGrid grid;
  grid.etas = parse_list<std::size_t>("eta", f.eta);
  grid.estimators = parse_list<std::size_t>("estimators", f.estimators);
  grid.conf_thresholds = parse_list<double>("conf-threshold", f.conf_threshold);
  std::string label = name;
  if (label.empty()) {
    label = data_path.substr(data_path.find_last_of('/') + 1);
    label = label.substr(0, label.find('.'));
  }
  const auto rep = grid.size() > 1
                       ? sweep_cross_validate(loaded.data, label, algo, base, grid, f.folds, f.seed, f.timing)
                       : cross_validate(loaded.data, label, algo, base, f.folds, f.seed, f.timing);
  std::ostringstream os;
  if (f.format == "tsv") {
    write_tsv(os, rep);
  } else if (f.format == "json-lines") {
    write_json_lines(os, rep);
  } else {
    write_text(os, rep);
  }
  std::cout << os.str();
  return kOk;
}

int cmd_compare(const Flags& f, const std::string& table_path) {
  const auto table = ComparisonTable::parse_tsv(read_file(table_path));
  table.validate();
  std::ostringstream os;
  const auto fr = friedman_test(table);
  struct Pair {
    std::size_t a, b;
    WilcoxonResult w;
  };
  std::vector<Pair> pairs;
  for (std::size_t a = 0; a < table.algorithms.size(); ++a) {
    for (std::size_t b = a + 1; b < table.algorithms.size(); ++b) {
      try {
        pairs.push_back({a, b, wilcoxon_signed_ranks(table.column(a), table.column(b))});
      } catch (const DataError&) {
        pairs.push_back({a, b, WilcoxonResult{0.0, 1.0, 0, 0, 0, 0, 0, table.datasets.size()}});
      }
    }
  }
  auto pair_name = [&](const Pair& p) { return table.algorithms[p.a] + " vs " + table.algorithms[p.b]; };
  if (f.format == "json-lines") {
    nlohmann::ordered_json j;
    j["test"] = "friedman";
    j["datasets"] = table.datasets.size();
    j["algorithms"] = table.algorithms.size();
    j["statistic"] = fr.statistic;
    j["dof"] = fr.dof;
    j["p_value"] = fr.p_value;
    nlohmann::ordered_json ranks;
    for (std::size_t k = 0; k < table.algorithms.size(); ++k) ranks[table.algorithms[k]] = fr.mean_ranks[k];
    j["mean_ranks"] = ranks;
    os << j.dump() << '\n';
    for (const auto& p : pairs) {
      nlohmann::ordered_json w;
      w["test"] = "wilcoxon";
      w["a"] = table.algorithms[p.a];
      w["b"] = table.algorithms[p.b];
      w["wins"] = p.w.wins;
      w["losses"] = p.w.losses;
      w["ties"] = p.w.ties;
      w["z"] = p.w.z;
      w["p_value"] = p.w.p_value;
      os << w.dump() << '\n';
    }
  } else if (f.format == "tsv") {
    os << "test\ta\tb\twins\tlosses\tties\tstatistic\tp_value\n";
    os << "friedman\t-\t-\t-\t-\t-\t" << format_double(fr.statistic) << '\t' << format_double(fr.p_value) << '\n';
    for (const auto& p : pairs) {
      os << "wilcoxon\t" << table.algorithms[p.a] << '\t' << table.algorithms[p.b] << '\t' << p.w.wins << '\t'
         << p.w.losses << '\t' << p.w.ties << '\t' << format_double(p.w.z) << '\t' << format_double(p.w.p_value)
         << '\n';
    }
  } else {
    char buf[256];
    std::snprintf(buf, sizeof buf, "Friedman: chi2=%.4f dof=%zu p=%.4g (N=%zu, k=%zu)\n", fr.statistic, fr.dof,
                  fr.p_value, table.datasets.size(), table.algorithms.size());
    os << buf << "mean ranks:";
    for (std::size_t k = 0; k < table.algorithms.size(); ++k) {
      std::snprintf(buf, sizeof buf, " %s=%.3f", table.algorithms[k].c_str(), fr.mean_ranks[k]);
      os << buf;
    }
    os << "\n\npair                      wins  losses  ties        z        p\n";
    for (const auto& p : pairs) {
      std::snprintf(buf, sizeof buf, "%-24s  %4zu  %6zu  %4zu  %7.3f  %7.3f\n", pair_name(p).c_str(), p.w.wins,
                    p.w.losses, p.w.ties, p.w.z, p.w.p_value);
      os << buf;
    }
  }
  std::cout << os.str();
  return kOk;
}

int cmd_render(const Flags& f, const std::string& rules_path, const std::string& map_path,
               const std::string& csv_path) {
  EncodingMap map;
  if (!map_path.empty()) {
    map = EncodingMap::read(read_file(map_path));
  } else if (!csv_path.empty()) {
    const auto text = read_file(csv_path);
    map = encode_csv(text, f.class_column.empty() ? last_header_cell(text) : f.class_column).map;
  } else {
    throw UsageError("render-rules needs --map or --csv");
  }
  std::ostringstream os;
  detail::for_each_line(read_file(rules_path), [&](std::string_view line, std::size_t line_no) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) return;
    if (line.front() == '#' || line.starts_with("mode=") || line.starts_with("alpha=")) {
      os << "# " << line << '\n';
      return;
    }
    if (line.starts_with("fallback=")) {
      const auto c = detail::parse_id32(line.substr(9), line_no);
      if (c >= map.classes.size()) throw DataError("fallback class not in map");
      os << "# fallback: (" << map.class_column << " = " << map.classes[c] << ")\n";
      return;
    }
    os << render_rule(parse_rule(line, line_no), map) << '\n';
  });
  std::cout << os.str();
  return kOk;
}

int cmd_encode(const Flags& f, const std::string& csv_path, const std::string& out_path,
               const std::string& map_out) {
  const auto text = read_file(csv_path);
  const auto enc = encode_csv(text, f.class_column.empty() ? last_header_cell(text) : f.class_column);
  std::ostringstream ds, ms;
  enc.dataset.write(ds);
  enc.map.write(ms);
  if (out_path.empty()) {
    std::cout << ds.str();
  } else {
    write_file(out_path, ds.str());
  }
  if (!map_out.empty()) write_file(map_out, ms.str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Significant class association rules: mining, pruning, classification and ensembles"};
  app.fallthrough();
  app.require_subcommand(1);
  Flags f;
  app.add_option("--alpha", f.alpha, "significance level for rule mining")->capture_default_str();
  app.add_option("--conf-threshold", f.conf_threshold, "coverage-stage confidence threshold (cv: comma list)")
      ->capture_default_str();
  app.add_option("--heuristic", f.heuristic, "class scoring: s1 (sum ln p), s2 (sum conf), s3 (sum ln p * conf)")
      ->check(CLI::IsMember({"s1", "s2", "s3", "S1", "S2", "S3"}))
      ->capture_default_str();
  app.add_flag("--use-counts", f.use_counts, "weight each rule term by its selection count");
  app.add_option("--scoring", f.scoring, "score a class by the sum over its rules or by its best rule")
      ->check(CLI::IsMember({"sum", "best"}))
      ->capture_default_str();
  app.add_option("--eta", f.eta, "rules kept per class by the weak learner (cv: comma list)")->capture_default_str();
  app.add_option("--estimators", f.estimators, "boosting rounds (cv: comma list)")->capture_default_str();
  app.add_option("--bag-size", f.bag_size, "bagging members")->capture_default_str();
  app.add_option("--algo", f.algo, "sigd2 | sigdirect | wsigdirect | acbag | acboost")
      ->check(CLI::IsMember({"sigd2", "sigdirect", "wsigdirect", "acbag", "acboost"}))
      ->capture_default_str();
  app.add_option("--folds", f.folds, "cross-validation folds")->capture_default_str();
  app.add_option("--seed", f.seed, "master seed")->capture_default_str();
  app.add_option("--format", f.format, "report format")
      ->check(CLI::IsMember({"text", "tsv", "json-lines"}))
      ->capture_default_str();
  app.add_option("--class-column", f.class_column, "CSV class column (default: last column)");
  app.add_option("--stage2-rows", f.stage2_rows, "rows scanned by instance selection")
      ->check(CLI::IsMember({"prune", "full"}))
      ->capture_default_str();
  app.add_option("--coverage-ties", f.coverage_ties, "coverage-stage tie order: conf (then ln p) or lnp")
      ->check(CLI::IsMember({"conf", "lnp"}))
      ->capture_default_str();
  app.add_option("--max-len", f.max_len, "maximum antecedent length (0 = unbounded)")->capture_default_str();
  app.add_flag("--timing", f.timing, "record wall time per fold (makes cv output non-reproducible)");

  std::string data, out, map_out, model, instances, map, csv, table, name;
  bool unlabeled = false;

  auto* mine = app.add_subcommand("mine", "mine significant rules; one rule line per rule");
  mine->add_option("data", data, "transaction file or .csv")->required();
  mine->add_option("-o,--output", out, "output file (default stdout)");
  mine->add_option("--map-out", map_out, "write the CSV encoding map here");

  auto* train = app.add_subcommand("train", "fit a model and serialize it");
  train->add_option("data", data, "transaction file or .csv")->required();
  train->add_option("-o,--output", out, "model file (default stdout)");
  train->add_option("--map-out", map_out, "write the CSV encoding map here");

  auto* pred = app.add_subcommand("predict", "predict one class per instance");
  pred->add_option("model", model, "model file")->required();
  pred->add_option("instances", instances, "transaction file or .csv")->required();
  pred->add_option("--map", map, "encoding map written at training (CSV instances)");
  pred->add_flag("--unlabeled", unlabeled, "transaction lines carry no class token");

  auto* cv = app.add_subcommand("cv", "stratified k-fold cross-validation report");
  cv->add_option("data", data, "transaction file or .csv")->required();
  cv->add_option("--name", name, "dataset name in the report (default: file stem)");

  auto* cmp = app.add_subcommand("compare", "Friedman and pairwise Wilcoxon tests over an accuracy table");
  cmp->add_option("table", table, "TSV: dataset column then one column per algorithm")->required();

  auto* render = app.add_subcommand("render-rules", "print rules with column names and labels");
  render->add_option("rules", data, "rule list or model file")->required();
  render->add_option("--map", map, "encoding map file");
  render->add_option("--csv", csv, "rebuild the map from this CSV");

  auto* enc = app.add_subcommand("encode", "CSV to transaction file plus encoding map");
  enc->add_option("csv", csv, "input CSV")->required();
  enc->add_option("-o,--output", out, "transaction file (default stdout)");
  enc->add_option("--map-out", map_out, "encoding map file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*mine) return cmd_mine(f, data, out, map_out);
    if (*train) return cmd_train(f, data, out, map_out);
    if (*pred) return cmd_predict(f, model, instances, map, unlabeled);
    if (*cv) return cmd_cv(f, data, name);
    if (*cmp) return cmd_compare(f, table);
    if (*render) return cmd_render(f, data, map, csv);
    if (*enc) return cmd_encode(f, csv, out, map_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n' << app.help();
    return kUsage;
  } catch (const TrainingError& e) {
    std::cerr << "training failed: " << e.what() << '\n';
    return kTraining;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
