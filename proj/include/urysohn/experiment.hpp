#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "urysohn/dataset.hpp"
#include "urysohn/metrics.hpp"
#include "urysohn/model_store.hpp"
#include "urysohn/random.hpp"
#include "urysohn/single_trainer.hpp"
#include "urysohn/tree.hpp"

namespace urysohn {

enum class ModelType { Linear, Urysohn, Tree };

inline ModelType parse_model_type(const std::string& s) {
  if (s == "linear") return ModelType::Linear;
  if (s == "urysohn" || s == "single") return ModelType::Urysohn;
  if (s == "tree") return ModelType::Tree;
  throw std::invalid_argument("unknown model kind '" + s + "' (expected linear, urysohn or tree)");
}

inline std::string to_string(ModelType t) {
  switch (t) {
    case ModelType::Linear: return "linear";
    case ModelType::Urysohn: return "urysohn";
    case ModelType::Tree: return "tree";
  }
  return "?";
}

enum class RangeSource { Validation, Dataset };

/// Everything that determines a training run, apart from the data.
struct RunConfig {
  ModelType model = ModelType::Tree;
  /// Per continuous input; a single entry applies to all.
  std::vector<std::size_t> nodes{10};
  std::size_t addends = 0;
  std::size_t root_nodes = 10;
  double alpha = 0.5;
  double mu = 0.2;
  double delta = 0.0;
  double alpha_branch = 0.5;
  double alpha_root = 0.5;
  std::size_t epochs = 100;
  std::size_t repeats = 1;
  std::uint64_t seed = 0;
  std::size_t folds = 10;
  double train_fraction = 0.6;
  double selection_fraction = 0.2;
  double test_fraction = 0.2;
  /// Parallel training jobs for folds and repeats.
  std::size_t jobs = 1;
  RangeSource nrmse_range = RangeSource::Validation;

  void validate() const {
    if (repeats == 0) throw std::invalid_argument("repeats must be positive");
    if (jobs == 0) throw std::invalid_argument("jobs must be positive");
    if (model == ModelType::Tree)
      tree_config(0).validate();
    else
      train_config(0).validate();
  }

  [[nodiscard]] TrainConfig train_config(std::uint64_t run_seed) const {
    TrainConfig c;
    c.alpha = alpha;
    c.epochs = epochs;
    c.nodes_per_input = model == ModelType::Linear ? std::vector<std::size_t>{2} : nodes;
    c.seed = run_seed;
    return c;
  }

  [[nodiscard]] TreeConfig tree_config(std::uint64_t run_seed) const {
    TreeConfig c;
    c.addends = addends;
    c.branch_nodes = nodes;
    c.root_nodes = root_nodes;
    c.mu = mu;
    c.delta = delta;
    c.alpha_branch = alpha_branch;
    c.alpha_root = alpha_root;
    c.epochs = epochs;
    c.seed = run_seed;
    return c;
  }

  /// key=value pairs echoed into model files.
  [[nodiscard]] std::vector<std::pair<std::string, std::string>> echo() const {
    const auto num = [](double v) {
      std::ostringstream os;
      os.precision(17);
      os << v;
      return os.str();
    };
    std::string node_list;
    for (std::size_t i = 0; i < nodes.size(); ++i) node_list += (i ? "," : "") + std::to_string(nodes[i]);
    std::vector<std::pair<std::string, std::string>> out{{"model", to_string(model)}, {"epochs", std::to_string(epochs)}};
    if (model == ModelType::Tree) {
      out.insert(out.end(), {{"addends", std::to_string(addends)},
                             {"nodes", node_list},
                             {"root_nodes", std::to_string(root_nodes)},
                             {"mu", num(mu)},
                             {"delta", num(delta)},
                             {"alpha_branch", num(alpha_branch)},
                             {"alpha_root", num(alpha_root)}});
    } else {
      if (model == ModelType::Urysohn) out.emplace_back("nodes", node_list);
      out.emplace_back("alpha", num(alpha));
    }
    return out;
  }
};

/// Runs body(i) for i in [0, count) on up to `jobs` threads. The first
/// exception is rethrown after all workers stop.
inline void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w)
    workers.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

struct TrainedModel {
  Model model;
  TrainTrace trace;
};

inline TrainedModel train_model(const Dataset& train, const RunConfig& cfg, std::uint64_t run_seed) {
  if (train.empty()) throw DataError("cannot train on an empty dataset");
  const auto ranges = input_ranges(train);
  TrainedModel out;
  out.model.columns = train.inputs;
  for (std::size_t j = 0; j < ranges.size(); ++j) {
    if (out.model.columns[j].is_categorical()) continue;
    out.model.columns[j].min = ranges[j].min;
    out.model.columns[j].max = ranges[j].max;
  }
  out.model.output = train.output;
  out.model.seed = run_seed;
  out.model.config = cfg.echo();
  if (cfg.model == ModelType::Tree) {
    out.model.kind = ModelKind::Tree;
    auto [tree, trace] = train_tree(train, ranges, cfg.tree_config(run_seed));
    out.model.tree = std::move(tree);
    out.trace = std::move(trace);
  } else {
    out.model.kind = ModelKind::Single;
    const auto tc = cfg.train_config(run_seed);
    auto init = cfg.model == ModelType::Linear ? make_operator(train.inputs, ranges, std::vector<std::size_t>{2})
                                               : make_operator(train.inputs, ranges, tc.nodes_per_input);
    auto [op, trace] = train_single(std::move(init), train, tc);
    out.model.single = std::move(op);
    out.trace = std::move(trace);
  }
  return out;
}

inline void check_compatible(const Model& model, const Dataset& data) {
  if (model.input_count() != data.input_count())
    throw DataError("model expects " + std::to_string(model.input_count()) + " inputs, data has " +
                    std::to_string(data.input_count()));
  for (std::size_t j = 0; j < model.columns.size(); ++j) {
    const auto& a = model.columns[j];
    const auto& b = data.inputs[j];
    if (a.is_categorical() != b.is_categorical())
      throw DataError("input " + std::to_string(j + 1) + " (" + a.name + ") differs in kind from the model");
    if (a.is_categorical() && a.categories != b.categories)
      throw DataError("input " + std::to_string(j + 1) + " (" + a.name + ") has different categories");
  }
}

/// Re-encodes categorical inputs of independently parsed data with the
/// model's level lists. Levels the model never saw are rejected.
inline Dataset conform_to_model(const Model& model, Dataset data) {
  if (model.input_count() != data.input_count())
    throw DataError("model expects " + std::to_string(model.input_count()) + " inputs, data has " +
                    std::to_string(data.input_count()));
  const std::size_t m = data.input_count();
  for (std::size_t j = 0; j < m; ++j) {
    const auto& want = model.columns[j];
    auto& have = data.inputs[j];
    if (!want.is_categorical()) {
      if (have.is_categorical())
        throw DataError("input " + std::to_string(j + 1) + " (" + have.name + ") is not numeric");
      continue;
    }
    std::vector<double> code(have.level_count() + 1, 0.0);
    for (std::size_t c = 0; c < have.level_count(); ++c) {
      const auto& level = have.categories[c];
      const auto it = std::lower_bound(want.categories.begin(), want.categories.end(), level);
      if (it != want.categories.end() && *it == level)
        code[c + 1] = static_cast<double>(it - want.categories.begin() + 1);
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      auto& v = data.x[i * m + j];
      const auto original = have.is_categorical() ? static_cast<std::size_t>(v) : 0;
      if (!have.is_categorical() || code[original] == 0.0) {
        const auto text = have.is_categorical() ? have.categories[original - 1] : std::to_string(v);
        throw DataError("input " + want.name + " has level '" + text + "' unknown to the model", i + 1);
      }
      v = code[original];
    }
    have = want;
  }
  return data;
}

inline std::vector<double> predict_all(const Model& model, const Dataset& data) {
  check_compatible(model, data);
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = model.predict(data.row(i));
  return out;
}

inline std::vector<double> gather(std::span<const double> v, std::span<const std::size_t> idx) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (const auto i : idx) out.push_back(v[i]);
  return out;
}

inline double data_range(const Dataset& d) {
  const auto [lo, hi] = std::minmax_element(d.z.begin(), d.z.end());
  return *hi - *lo;
}

/// Statistics of one repeat (one CV sweep or one select run).
struct RunStats {
  std::optional<double> pearson;
  double nrmse = 0.0;
  std::optional<std::size_t> misclassified;
  std::size_t n = 0;

  [[nodiscard]] std::optional<double> accuracy() const {
    if (!misclassified || n == 0) return std::nullopt;
    return 1.0 - static_cast<double>(*misclassified) / static_cast<double>(n);
  }
};

struct Aggregate {
  std::vector<RunStats> runs;
  std::optional<ConfidenceInterval> pearson;
  std::optional<ConfidenceInterval> nrmse;
  std::optional<ConfidenceInterval> misclassified;
  std::optional<ConfidenceInterval> accuracy;
  /// Means, available even for a single run.
  double mean_pearson = 0.0;
  double mean_nrmse = 0.0;
  double mean_misclassified = 0.0;
  double mean_accuracy = 0.0;
};

inline Aggregate aggregate(std::vector<RunStats> runs) {
  Aggregate a;
  a.runs = std::move(runs);
  std::vector<double> p, e, c, acc;
  for (const auto& r : a.runs) {
    if (r.pearson) p.push_back(*r.pearson);
    e.push_back(r.nrmse);
    if (r.misclassified) {
      c.push_back(static_cast<double>(*r.misclassified));
      acc.push_back(*r.accuracy());
    }
  }
  const auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (const double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  a.mean_pearson = mean(p);
  a.mean_nrmse = mean(e);
  a.mean_misclassified = mean(c);
  a.mean_accuracy = mean(acc);
  if (p.size() >= 2) a.pearson = ci95(p);
  if (e.size() >= 2) a.nrmse = ci95(e);
  if (c.size() >= 2) a.misclassified = ci95(c);
  if (acc.size() >= 2) a.accuracy = ci95(acc);
  return a;
}

/// k-fold cross-validation repeated cfg.repeats times. Per repeat, Pearson
/// and nrmse are averaged over folds and misclassifications are summed (each
/// record is validated once). Repeat r uses split seed derive_seed(seed, r)
/// and fold f trains with derive_seed(seed, r, f + 1).
inline Aggregate run_cv(const Dataset& data, const RunConfig& cfg) {
  cfg.validate();
  const std::size_t k = cfg.folds;
  const std::size_t total = cfg.repeats * k;
  struct FoldResult {
    std::optional<double> pearson;
    double nrmse = 0.0;
    std::optional<std::size_t> misclassified;
  };
  std::vector<FoldPlan> plans;
  for (std::size_t r = 0; r < cfg.repeats; ++r) plans.push_back(split_kfold(data.size(), k, derive_seed(cfg.seed, r)));
  const double full_range = data_range(data);

  std::vector<FoldResult> results(total);
  parallel_for(total, cfg.jobs, [&](std::size_t job) {
    const std::size_t r = job / k;
    const std::size_t f = job % k;
    const auto& fold = plans[r].folds[f];
    std::vector<bool> in_train(data.size(), false);
    for (const auto i : fold.train) in_train[i] = true;
    for (const auto i : fold.validation)
      if (in_train[i]) throw std::logic_error("validation record " + std::to_string(i) + " is in its training fold");
    const auto train = data.subset(fold.train);
    const auto validation = data.subset(fold.validation);
    const auto trained = train_model(train, cfg, derive_seed(cfg.seed, r, f + 1));
    const auto z_hat = predict_all(trained.model, validation);
    FoldResult out;
    out.pearson = pearson(validation.z, z_hat);
    const double range = cfg.nrmse_range == RangeSource::Dataset ? full_range : data_range(validation);
    out.nrmse = range > 0.0 ? nrmse(validation.z, z_hat, range) : 0.0;
    if (is_sign_labelled(data.z)) out.misclassified = classification_errors(validation.z, z_hat);
    results[job] = out;
  });

  std::vector<RunStats> runs;
  for (std::size_t r = 0; r < cfg.repeats; ++r) {
    RunStats s;
    s.n = data.size();
    double sp = 0.0;
    std::size_t np = 0;
    for (std::size_t f = 0; f < k; ++f) {
      const auto& fr = results[r * k + f];
      if (fr.pearson) {
        sp += *fr.pearson;
        ++np;
      }
      s.nrmse += fr.nrmse / static_cast<double>(k);
      if (fr.misclassified) s.misclassified = s.misclassified.value_or(0) + *fr.misclassified;
    }
    if (np) s.pearson = sp / static_cast<double>(np);
    runs.push_back(s);
  }
  return aggregate(std::move(runs));
}

struct SelectResult {
  Model best;
  std::size_t best_index = 0;
  std::vector<double> selection_scores;
  RunStats test;
};

/// Trains cfg.repeats candidates on the training subset, keeps the one that
/// scores best on the selection subset (highest Pearson, or fewest errors
/// for ±1 outputs) and evaluates it once on the test subset.
inline SelectResult run_select(const Dataset& data, const RunConfig& cfg, std::uint64_t split_seed) {
  cfg.validate();
  const auto split = split_fractions(data.size(), cfg.train_fraction, cfg.selection_fraction, cfg.test_fraction,
                                     split_seed);
  const auto train = data.subset(split.train);
  const auto selection = data.subset(split.selection);
  const auto test = data.subset(split.test);
  const bool classify = is_sign_labelled(data.z);

  std::vector<Model> candidates(cfg.repeats);
  std::vector<double> scores(cfg.repeats);
  parallel_for(cfg.repeats, cfg.jobs, [&](std::size_t r) {
    candidates[r] = train_model(train, cfg, derive_seed(split_seed, r + 1)).model;
    const auto z_hat = predict_all(candidates[r], selection);
    if (classify)
      scores[r] = -static_cast<double>(classification_errors(selection.z, z_hat));
    else
      scores[r] = pearson(selection.z, z_hat).value_or(-2.0);
  });
  SelectResult out;
  out.selection_scores = scores;
  out.best_index = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
  out.best = std::move(candidates[out.best_index]);
  const auto z_hat = predict_all(out.best, test);
  out.test.n = test.size();
  out.test.pearson = pearson(test.z, z_hat);
  const double range = cfg.nrmse_range == RangeSource::Dataset ? data_range(data) : data_range(test);
  out.test.nrmse = range > 0.0 ? nrmse(test.z, z_hat, range) : 0.0;
  if (classify) out.test.misclassified = classification_errors(test.z, z_hat);
  return out;
}

/// Repeated select runs (distinct splits) aggregated into confidence intervals.
inline Aggregate run_select_repeated(const Dataset& data, const RunConfig& cfg, std::size_t executions) {
  std::vector<RunStats> runs;
  for (std::size_t e = 0; e < executions; ++e) runs.push_back(run_select(data, cfg, derive_seed(cfg.seed, e)).test);
  return aggregate(std::move(runs));
}

/// Train on one subset, evaluate on another.
inline RunStats run_holdout(const Dataset& train, const Dataset& validation, const RunConfig& cfg,
                            Model* trained_out = nullptr) {
  cfg.validate();
  auto trained = train_model(train, cfg, cfg.seed);
  const auto z_hat = predict_all(trained.model, validation);
  RunStats s;
  s.n = validation.size();
  s.pearson = pearson(validation.z, z_hat);
  const double range = data_range(validation);
  s.nrmse = range > 0.0 ? nrmse(validation.z, z_hat, range) : 0.0;
  if (is_sign_labelled(validation.z)) s.misclassified = classification_errors(validation.z, z_hat);
  if (trained_out) *trained_out = std::move(trained.model);
  return s;
}

inline std::string to_key_value(const Aggregate& a, const std::string& prefix = "") {
  std::ostringstream os;
  os.precision(10);
  os << prefix << "runs=" << a.runs.size() << '\n';
  os << prefix << "pearson.mean=" << a.mean_pearson << '\n';
  if (a.pearson) os << prefix << "pearson.ci95=" << a.pearson->half_width << '\n';
  os << prefix << "nrmse.mean=" << a.mean_nrmse << '\n';
  if (a.nrmse) os << prefix << "nrmse.ci95=" << a.nrmse->half_width << '\n';
  if (!a.runs.empty() && a.runs.front().misclassified) {
    os << prefix << "misclassified.mean=" << a.mean_misclassified << '\n';
    if (a.misclassified) os << prefix << "misclassified.ci95=" << a.misclassified->half_width << '\n';
    os << prefix << "accuracy.mean=" << a.mean_accuracy << '\n';
    if (a.accuracy) os << prefix << "accuracy.ci95=" << a.accuracy->half_width << '\n';
  }
  return os.str();
}

}  // namespace urysohn
