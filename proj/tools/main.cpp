// urysohn: command-line front end for training and evaluating Urysohn
// operators and Urysohn trees on delimited data.
//
// Every option may also be given in a key=value file passed with --config;
// flags on the command line win. Exit codes: 0 success, 1 data or
// configuration error, 2 threshold failure under --assert.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "urysohn/bench.hpp"
#include "urysohn/csv.hpp"
#include "urysohn/experiment.hpp"
#include "urysohn/metrics.hpp"
#include "urysohn/model_store.hpp"

namespace {

using namespace urysohn;
using json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitThreshold = 2;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Key {
  const char* name;
  const char* help;
};

const std::vector<Key> kDataKeys{
    {"data", "input file (delimited text)"},
    {"delimiter", "field delimiter: ',', ';' or 'tab' (default: detect)"},
    {"header", "first line holds column names (true/false)"},
    {"output-column", "1-based output column (default: last)"},
    {"ignore", "comma-separated 1-based columns to drop"},
    {"quantize", "comma-separated 1-based numeric columns to treat as categorical"},
    {"binary-output", "map a two-valued numeric output to -1/+1 (true/false)"},
};

const std::vector<Key> kModelKeys{
    {"model", "linear, urysohn or tree"},
    {"nodes", "nodes per input function, one value or a comma list per column"},
    {"addends", "tree branches K (0: 2m+1)"},
    {"root-nodes", "nodes per root function"},
    {"alpha", "Kaczmarz step for linear and urysohn models"},
    {"mu", "tree: share of the residual moved onto the auxiliary variables"},
    {"delta", "tree: slope threshold (0: automatic)"},
    {"alpha-branch", "tree: Kaczmarz step for branch operators"},
    {"alpha-root", "tree: Kaczmarz step for the root operator"},
    {"epochs", "training passes over the data"},
    {"seed", "master seed"},
};

const std::vector<Key> kProtocolKeys{
    {"repeats", "cv: repetitions; select: candidates per split"},
    {"folds", "cv: number of folds"},
    {"fractions", "select: train,selection,test fractions"},
    {"executions", "select: independent splits"},
    {"nrmse-range", "nrmse divisor: validation or dataset output range"},
};

const std::vector<Key> kAssertKeys{
    {"min-pearson", "--assert: lowest acceptable Pearson"},
    {"max-nrmse", "--assert: highest acceptable nrmse"},
    {"max-errors", "--assert: highest acceptable misclassification count"},
    {"min-accuracy", "--assert: lowest acceptable accuracy"},
};

const std::vector<Key> kOutputKeys{
    {"model-out", "write the trained model here"},
    {"model-file", "model to apply"},
    {"out", "output file ('-' for standard output)"},
    {"report", "also write the key=value report here"},
    {"json", "write a JSON report here"},
    {"trace", "write per-epoch training residuals here"},
    {"count", "synth: number of records"},
    {"data-dir", "bench: directory holding the downloaded datasets"},
};

/// Options resolved from the config file overlaid with command-line flags.
class Settings {
 public:
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }
  [[nodiscard]] const std::map<std::string, std::string>& all() const { return values_; }

  [[nodiscard]] std::string str(const std::string& key, const std::string& fallback = "") const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  [[nodiscard]] std::string required(const std::string& key) const {
    if (!has(key) || values_.at(key).empty()) throw ConfigError("missing required option '" + key + "'");
    return values_.at(key);
  }

  [[nodiscard]] double real(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const auto v = detail::parse_number(detail::trim(values_.at(key)));
    if (!v) throw ConfigError("option '" + key + "' expects a number, got '" + values_.at(key) + "'");
    return *v;
  }

  [[nodiscard]] std::optional<double> maybe_real(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return real(key, 0.0);
  }

  [[nodiscard]] std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    return parse_count(key, values_.at(key));
  }

  [[nodiscard]] bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = values_.at(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("option '" + key + "' expects true or false, got '" + v + "'");
  }

  [[nodiscard]] std::vector<std::size_t> counts(const std::string& key) const {
    std::vector<std::size_t> out;
    if (!has(key)) return out;
    for (const auto& part : detail::split(values_.at(key), ','))
      if (!part.empty()) out.push_back(static_cast<std::size_t>(parse_count(key, part)));
    return out;
  }

  [[nodiscard]] std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& part : detail::split(values_.at(key), ',')) {
      const auto v = detail::parse_number(part);
      if (!v) throw ConfigError("option '" + key + "' expects numbers, got '" + part + "'");
      out.push_back(*v);
    }
    return out;
  }

 private:
  static std::uint64_t parse_count(const std::string& key, const std::string& text) {
    const auto t = detail::trim(text);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size())
      throw ConfigError("option '" + key + "' expects a non-negative integer, got '" + std::string(t) + "'");
    return v;
  }

  std::map<std::string, std::string> values_;
};

bool known_key(const std::string& key) {
  for (const auto* group : {&kDataKeys, &kModelKeys, &kProtocolKeys, &kAssertKeys, &kOutputKeys})
    for (const auto& k : *group)
      if (key == k.name) return true;
  return key == "jobs";
}

/// key = value lines; '#' starts a comment.
Settings load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  Settings s;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(path + ":" + std::to_string(number) + ": expected key=value");
    const std::string key(detail::trim(t.substr(0, eq)));
    if (!known_key(key)) throw ConfigError(path + ":" + std::to_string(number) + ": unknown key '" + key + "'");
    s.set(key, std::string(detail::trim(t.substr(eq + 1))));
  }
  return s;
}

/// Flag storage for one subcommand; resolve() overlays given flags on the
/// config file.
struct Command {
  CLI::App* app = nullptr;
  std::map<std::string, std::string> flags;
  std::string config_path;
  std::size_t jobs = 1;
  bool assert_mode = false;

  void add(const std::vector<Key>& keys) {
    for (const auto& k : keys) app->add_option(std::string("--") + k.name, flags[k.name], k.help);
  }

  [[nodiscard]] Settings resolve() const {
    Settings s = config_path.empty() ? Settings{} : load_config(config_path);
    for (const auto& [key, value] : flags)
      if (app->get_option("--" + key)->count() > 0) s.set(key, value);
    if (app->get_option("--jobs")->count() > 0) s.set("jobs", std::to_string(jobs));
    return s;
  }
};

Command make_command(CLI::App& parent, const std::string& name, const std::string& description) {
  Command c;
  c.app = parent.add_subcommand(name, description);
  return c;
}

void add_common(Command& c) {
  c.app->add_option("--config", c.config_path, "key=value file with default options")->check(CLI::ExistingFile);
  c.app->add_option("--jobs", c.jobs, "parallel training jobs")->check(CLI::PositiveNumber);
}

CsvOptions csv_options(const Settings& s) {
  CsvOptions o;
  const auto d = s.str("delimiter");
  if (d == "tab" || d == "\\t")
    o.delimiter = '\t';
  else if (d.size() == 1)
    o.delimiter = d[0];
  else if (!d.empty())
    throw ConfigError("delimiter must be a single character or 'tab'");
  o.header = s.flag("header", false);
  o.output_column = s.count("output-column", 0);
  o.ignored = s.counts("ignore");
  o.quantized = s.counts("quantize");
  o.binary_output = s.flag("binary-output", false);
  return o;
}

RunConfig run_config(const Settings& s) {
  RunConfig c;
  if (s.has("model")) c.model = parse_model_type(s.str("model"));
  if (s.has("nodes")) c.nodes = s.counts("nodes");
  c.addends = s.count("addends", c.addends);
  c.root_nodes = s.count("root-nodes", c.root_nodes);
  c.alpha = s.real("alpha", c.alpha);
  c.mu = s.real("mu", c.mu);
  c.delta = s.real("delta", c.delta);
  c.alpha_branch = s.real("alpha-branch", c.alpha_branch);
  c.alpha_root = s.real("alpha-root", c.alpha_root);
  c.epochs = s.count("epochs", c.epochs);
  c.seed = s.count("seed", c.seed);
  c.repeats = s.count("repeats", c.repeats);
  c.folds = s.count("folds", c.folds);
  if (s.has("fractions")) {
    const auto f = s.reals("fractions");
    if (f.size() != 3) throw ConfigError("fractions needs three values: train,selection,test");
    c.train_fraction = f[0];
    c.selection_fraction = f[1];
    c.test_fraction = f[2];
  }
  const auto range = s.str("nrmse-range", "validation");
  if (range == "dataset")
    c.nrmse_range = RangeSource::Dataset;
  else if (range != "validation")
    throw ConfigError("nrmse-range must be validation or dataset");
  c.jobs = s.count("jobs", 1);
  c.validate();
  return c;
}

/// Collected results: printed as key=value and mirrored into JSON.
struct Report {
  std::vector<std::pair<std::string, std::string>> lines;
  json doc = json::object();

  void add(const std::string& key, const std::string& text, json value) {
    lines.emplace_back(key, text);
    doc["results"][key] = std::move(value);
  }
  void add(const std::string& key, double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    add(key, os.str(), v);
  }
  void add(const std::string& key, std::size_t v) { add(key, std::to_string(v), v); }
  void add(const std::string& key, const std::string& v) { add(key, v, v); }

  void add_eval(const std::string& prefix, const RunStats& r) {
    add(prefix + "records", r.n);
    if (r.pearson) add(prefix + "pearson", *r.pearson);
    add(prefix + "nrmse", r.nrmse);
    if (r.misclassified) {
      add(prefix + "misclassified", *r.misclassified);
      add(prefix + "accuracy", *r.accuracy());
    }
  }

  void add_aggregate(const std::string& prefix, const Aggregate& a) {
    add(prefix + "runs", a.runs.size());
    const auto interval = [&](const std::string& name, double mean, const std::optional<ConfidenceInterval>& ci) {
      add(prefix + name + ".mean", mean);
      if (ci) add(prefix + name + ".ci95", ci->half_width);
    };
    if (!a.runs.empty() && a.runs.front().pearson) interval("pearson", a.mean_pearson, a.pearson);
    interval("nrmse", a.mean_nrmse, a.nrmse);
    if (!a.runs.empty() && a.runs.front().misclassified) {
      interval("misclassified", a.mean_misclassified, a.misclassified);
      interval("accuracy", a.mean_accuracy, a.accuracy);
    }
  }

  [[nodiscard]] std::string text() const {
    std::string out;
    for (const auto& [k, v] : lines) out += k + "=" + v + "\n";
    return out;
  }
};

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("write failed: " + path);
}

void emit(const std::string& command, const Settings& s, Report& report) {
  std::cout << report.text();
  if (s.has("report")) write_text(s.str("report"), report.text());
  if (s.has("json")) {
    json doc;
    doc["command"] = command;
    doc["options"] = s.all();
    doc["results"] = report.doc["results"];
    write_text(s.str("json"), doc.dump(2) + "\n");
  }
}

/// Threshold checks; returns the exit code under --assert.
int check_thresholds(const Settings& s, bool assert_mode, std::optional<double> pearson_value, double nrmse_value,
                     std::optional<double> errors, std::optional<double> accuracy) {
  if (!assert_mode) return kExitOk;
  bool ok = true;
  const auto fail = [&](const std::string& what) {
    std::cerr << "assert: " << what << '\n';
    ok = false;
  };
  if (const auto lo = s.maybe_real("min-pearson"); lo && !(pearson_value && *pearson_value >= *lo))
    fail("Pearson below " + s.str("min-pearson"));
  if (const auto hi = s.maybe_real("max-nrmse"); hi && !(nrmse_value <= *hi)) fail("nrmse above " + s.str("max-nrmse"));
  if (const auto hi = s.maybe_real("max-errors"); hi && !(errors && *errors <= *hi))
    fail("misclassifications above " + s.str("max-errors"));
  if (const auto lo = s.maybe_real("min-accuracy"); lo && !(accuracy && *accuracy >= *lo))
    fail("accuracy below " + s.str("min-accuracy"));
  return ok ? kExitOk : kExitThreshold;
}

/// nrmse over the data's own output range; undefined for constant outputs.
double nrmse_or_nan(const Dataset& data, std::span<const double> z_hat) {
  const double range = data_range(data);
  return range > 0.0 ? nrmse(data.z, z_hat, range) : std::numeric_limits<double>::quiet_NaN();
}

Dataset load_data(const Settings& s) { return parse_csv(s.required("data"), csv_options(s)); }

// ---------------------------------------------------------------------------
// Commands

int cmd_synth(const Command& c) {
  const auto s = c.resolve();
  const auto count = s.count("count", bench::kSyntheticRecords);
  if (count == 0) throw ConfigError("count must be positive");
  const auto data = synth_generate(count, s.count("seed", 0));
  std::ostringstream os;
  write_csv(data, os);
  write_text(s.str("out", "-"), os.str());
  return kExitOk;
}

int cmd_train(const Command& c) {
  const auto s = c.resolve();
  const auto cfg = run_config(s);
  const auto data = load_data(s);
  const auto trained = train_model(data, cfg, cfg.seed);
  if (s.has("model-out")) save_model(trained.model, s.str("model-out"));
  if (s.has("trace")) {
    std::ostringstream os;
    os.precision(10);
    os << "epoch,mean_abs_residual,skip_rate\n";
    const auto& t = trained.trace;
    for (std::size_t e = 0; e < t.epoch_mean_abs_residual.size(); ++e)
      os << e + 1 << ',' << t.epoch_mean_abs_residual[e] << ','
         << (e < t.epoch_skip_rate.size() ? t.epoch_skip_rate[e] : 0.0) << '\n';
    write_text(s.str("trace"), os.str());
  }
  const auto z_hat = predict_all(trained.model, data);
  RunStats stats;
  stats.n = data.size();
  stats.pearson = pearson(data.z, z_hat);
  stats.nrmse = nrmse_or_nan(data, z_hat);
  if (is_sign_labelled(data.z)) stats.misclassified = classification_errors(data.z, z_hat);
  Report report;
  report.add("model", to_string(cfg.model));
  report.add("parameters", trained.model.kind == ModelKind::Single
                               ? trained.model.single.parameter_count()
                               : [&] {
                                   std::size_t n = trained.model.tree.root.parameter_count();
                                   for (const auto& b : trained.model.tree.branches) n += b.parameter_count();
                                   return n;
                                 }());
  report.add_eval("train.", stats);
  emit("train", s, report);
  return check_thresholds(s, c.assert_mode, stats.pearson, stats.nrmse,
                          stats.misclassified ? std::optional<double>(*stats.misclassified) : std::nullopt,
                          stats.accuracy());
}

int cmd_cv(const Command& c) {
  const auto s = c.resolve();
  const auto cfg = run_config(s);
  const auto data = load_data(s);
  if (cfg.folds < 2 || cfg.folds > data.size())
    throw ConfigError("folds must lie in [2, " + std::to_string(data.size()) + "]");
  const auto agg = run_cv(data, cfg);
  Report report;
  report.add("model", to_string(cfg.model));
  report.add("folds", cfg.folds);
  report.add_aggregate("cv.", agg);
  emit("cv", s, report);
  const bool classify = !agg.runs.empty() && agg.runs.front().misclassified.has_value();
  return check_thresholds(s, c.assert_mode, std::optional(agg.mean_pearson), agg.mean_nrmse,
                          classify ? std::optional(agg.mean_misclassified) : std::nullopt,
                          classify ? std::optional(agg.mean_accuracy) : std::nullopt);
}

int cmd_select(const Command& c) {
  const auto s = c.resolve();
  const auto cfg = run_config(s);
  const auto data = load_data(s);
  const auto executions = s.count("executions", 1);
  if (executions == 0) throw ConfigError("executions must be positive");
  std::vector<RunStats> runs;
  Report report;
  report.add("model", to_string(cfg.model));
  for (std::size_t e = 0; e < executions; ++e) {
    const auto result = run_select(data, cfg, derive_seed(cfg.seed, e));
    if (e == 0 && s.has("model-out")) save_model(result.best, s.str("model-out"));
    const auto prefix = "execution" + std::to_string(e + 1) + ".";
    report.add(prefix + "best_candidate", result.best_index + 1);
    report.add_eval(prefix + "test.", result.test);
    runs.push_back(result.test);
  }
  const auto agg = aggregate(runs);
  report.add_aggregate("test.", agg);
  emit("select", s, report);
  const bool classify = runs.front().misclassified.has_value();
  return check_thresholds(s, c.assert_mode, std::optional(agg.mean_pearson), agg.mean_nrmse,
                          classify ? std::optional(agg.mean_misclassified) : std::nullopt,
                          classify ? std::optional(agg.mean_accuracy) : std::nullopt);
}

/// Number of fields on the first non-empty line (after the header, if any).
std::size_t field_count(const std::string& text, const CsvOptions& opt) {
  std::istringstream in(text);
  std::string line;
  bool skipped_header = !opt.header;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    const char d = opt.delimiter ? opt.delimiter : detail::detect_delimiter(line);
    return detail::split(line, d).size();
  }
  return 0;
}

int cmd_predict(const Command& c) {
  const auto s = c.resolve();
  const auto model = load_model(s.required("model-file"));
  const auto path = s.required("data");
  const auto text = read_file(path);
  auto opt = csv_options(s);
  opt.allow_degenerate = true;
  opt.has_output = field_count(text, opt) != model.input_count() + opt.ignored.size();
  const auto data = conform_to_model(model, parse_csv_text(text, opt, path));
  const auto z_hat = predict_all(model, data);

  std::ostringstream os;
  os.precision(17);
  os << "z_hat" << (opt.has_output ? ",z" : "") << '\n';
  for (std::size_t i = 0; i < z_hat.size(); ++i) {
    os << z_hat[i];
    if (opt.has_output) os << ',' << data.z[i];
    os << '\n';
  }
  Report report;
  if (s.has("out")) write_text(s.str("out"), os.str());
  if (!opt.has_output) {
    report.add("records", data.size());
    if (!s.has("out")) std::cout << os.str();
    emit("predict", s, report);
    return kExitOk;
  }
  RunStats stats;
  stats.n = data.size();
  stats.pearson = pearson(data.z, z_hat);
  stats.nrmse = nrmse_or_nan(data, z_hat);
  if (is_sign_labelled(data.z)) stats.misclassified = classification_errors(data.z, z_hat);
  report.add_eval("", stats);
  emit("predict", s, report);
  return check_thresholds(s, c.assert_mode, stats.pearson, stats.nrmse,
                          stats.misclassified ? std::optional<double>(*stats.misclassified) : std::nullopt,
                          stats.accuracy());
}

std::vector<bench::Result> run_bench(const std::vector<std::string>& names, const Settings& s) {
  bench::Options opt;
  opt.data_dir = s.str("data-dir", "data");
  opt.seed = s.count("seed", opt.seed);
  opt.jobs = s.count("jobs", 1);
  if (opt.jobs == 0) throw ConfigError("jobs must be positive");
  std::vector<const bench::Experiment*> chosen;
  for (const auto& n : names) {
    if (n == "all") {
      for (const auto& e : bench::experiments()) chosen.push_back(&e);
      continue;
    }
    const auto* e = bench::find_experiment(n);
    if (!e) throw ConfigError("unknown experiment '" + n + "'");
    chosen.push_back(e);
  }
  std::vector<bench::Result> results;
  for (const auto* e : chosen) {
    std::cerr << "running " << e->name << " ..." << std::endl;
    results.push_back(e->run(opt));
    std::cout << bench::format_result(results.back()) << std::flush;
  }
  return results;
}

int bench_exit(const std::vector<bench::Result>& results, bool assert_mode) {
  if (!assert_mode) return kExitOk;
  for (const auto& r : results)
    if (r.status == bench::Status::Fail) return kExitThreshold;
  return kExitOk;
}

json bench_json(const std::vector<bench::Result>& results) {
  json out = json::array();
  for (const auto& r : results) {
    json e{{"experiment", r.name}, {"status", bench::to_string(r.status)}, {"seconds", r.seconds}};
    if (r.status == bench::Status::FetchRequired) e["fetch"] = r.notes;
    for (const auto& c : r.checks)
      e["checks"].push_back({{"metric", c.label},
                             {"value", c.value},
                             {"lo", std::isinf(c.lo) ? json(nullptr) : json(c.lo)},
                             {"hi", c.hi},
                             {"reference", c.reference},
                             {"pass", c.pass()}});
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Urysohn operator and Urysohn tree identification"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every command");

  auto synth = make_command(app, "synth", "generate the 5-input synthetic dataset as CSV");
  add_common(synth);
  synth.add({{"count", "number of records"}, {"seed", "generator seed"}, {"out", "output file ('-' for stdout)"}});

  auto train = make_command(app, "train", "train one model and report in-sample metrics");
  auto cv = make_command(app, "cv", "repeated k-fold cross-validation");
  auto select = make_command(app, "select", "train/selection/test protocol with best-of-N selection");
  for (auto* c : {&train, &cv, &select}) {
    add_common(*c);
    c->add(kDataKeys);
    c->add(kModelKeys);
    c->add({{"report", "also write the key=value report here"}, {"json", "write a JSON report here"}});
    c->add(kAssertKeys);
    c->app->add_flag("--assert", c->assert_mode, "exit with code 2 when a threshold is missed");
  }
  train.add({{"model-out", "write the trained model here"}, {"trace", "write per-epoch residuals as CSV"}});
  cv.add({{"repeats", "repetitions of the whole cross-validation"},
          {"folds", "number of folds"},
          {"nrmse-range", "nrmse divisor: validation or dataset output range"}});
  select.add({{"repeats", "candidates trained per split"},
              {"fractions", "train,selection,test fractions"},
              {"executions", "independent splits"},
              {"nrmse-range", "nrmse divisor: validation or dataset output range"},
              {"model-out", "write the best model of the first split here"}});

  auto predict = make_command(app, "predict", "apply a saved model to a dataset");
  add_common(predict);
  predict.add(kDataKeys);
  predict.add({{"model-file", "model to apply"},
               {"out", "write z_hat (and z) as CSV here ('-' for stdout)"},
               {"report", "also write the key=value report here"},
               {"json", "write a JSON report here"}});
  predict.add(kAssertKeys);
  predict.app->add_flag("--assert", predict.assert_mode, "exit with code 2 when a threshold is missed");

  auto bench_cmd = make_command(app, "bench", "pinned benchmark experiments");
  bench_cmd.app->require_subcommand(1);
  std::vector<std::string> run_names;
  std::string table_out;
  std::string table_delimiter = ";";
  auto bench_run = make_command(*bench_cmd.app, "run", "run experiments by name, or 'all'");
  auto bench_table = make_command(*bench_cmd.app, "table", "run experiments and print the comparison table");
  for (auto* c : {&bench_run, &bench_table}) {
    add_common(*c);
    c->add({{"data-dir", "directory holding downloaded datasets"},
            {"seed", "master seed"},
            {"json", "write a JSON report here"}});
    c->app->add_flag("--assert", c->assert_mode, "exit with code 2 when an experiment fails");
  }
  bench_run.app->add_option("names", run_names, "experiment names or 'all'")->required();
  bench_table.app->add_option("names", run_names, "experiment names (default: all)");
  bench_table.app->add_option("--dsv", table_out, "write the delimiter-separated table here");
  bench_table.app->add_option("--delimiter", table_delimiter, "field delimiter for the table")
      ->check([](const std::string& d) { return d.size() == 1 ? std::string{} : "must be one character"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (synth.app->parsed()) return cmd_synth(synth);
    if (train.app->parsed()) return cmd_train(train);
    if (cv.app->parsed()) return cmd_cv(cv);
    if (select.app->parsed()) return cmd_select(select);
    if (predict.app->parsed()) return cmd_predict(predict);
    for (auto* c : {&bench_run, &bench_table}) {
      if (!c->app->parsed()) continue;
      const auto s = c->resolve();
      if (run_names.empty()) run_names = {"all"};
      const auto results = run_bench(run_names, s);
      if (c == &bench_table) {
        std::cout << '\n' << bench::format_table(results, table_delimiter[0]);
        if (!table_out.empty()) write_text(table_out, bench::format_table(results, table_delimiter[0]));
      }
      if (s.has("json")) write_text(s.str("json"), bench_json(results).dump(2) + "\n");
      return bench_exit(results, c->assert_mode);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitError;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitError;
  } catch (const ModelFormatError& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
