// Acceptance suite: one PASS / FAIL / SKIP line per criterion.
//
// Exit status is 0 when every criterion passes or is skipped, except those
// named with --expect-fail, which must fail for the run to succeed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "urysohn/bench.hpp"
#include "urysohn/experiment.hpp"
#include "urysohn/model_store.hpp"
#include "urysohn/single_trainer.hpp"
#include "urysohn/tree.hpp"

using namespace urysohn;

namespace {

// Tolerances and limits.
constexpr int kRecurrenceTrials = 10000;
constexpr double kRecurrenceTolerance = 1e-10;
constexpr double kRecurrenceSeconds = 1.0;

constexpr int kMinNormInstances = 60;
constexpr double kMinNormTolerance = 1e-3;
constexpr double kMinNormSeconds = 10.0;
constexpr std::size_t kMinNormEpochs = 20000;

constexpr double kSyntheticSeconds = 120.0;

constexpr double kExactTolerance = 1e-10;
constexpr double kRegridTolerance = 1e-12;

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
  Verdict verdict = Verdict::Pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

std::string sci(double v) {
  std::ostringstream os;
  os.setf(std::ios::scientific);
  os.precision(2);
  os << v;
  return os.str();
}

std::vector<double> uniform_values(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& y : v) y = u(rng);
  return v;
}

Outcome residual_recurrence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < kRecurrenceTrials; ++t) {
    const std::size_t m = 1 + static_cast<std::size_t>(t % 7);
    std::vector<PiecewiseLinear> fs;
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t n = 2 + static_cast<std::size_t>((t + j) % 9);
      if ((t + j) % 5 == 0)
        fs.push_back(PiecewiseLinear::quantized(uniform_values(rng, n, -1, 1)));
      else
        fs.emplace_back(-1.0, 2.0, uniform_values(rng, n, -1, 1));
    }
    UrysohnOperator op(fs);
    std::vector<double> x(m);
    for (std::size_t j = 0; j < m; ++j)
      x[j] = fs[j].is_quantized() ? std::floor(1.0 + u(rng) * static_cast<double>(fs[j].size()))
                                  : -1.0 + 3.0 * u(rng);
    const double z = 6.0 * u(rng) - 3.0;
    const double alpha = 0.001 + 1.998 * u(rng);
    const double d = kaczmarz_step(op, x, z, alpha);
    const double after = z - op.evaluate(x);
    worst = std::max(worst, std::abs(after - (1.0 - alpha) * d) / std::max(1.0, std::abs(d)));
  }
  const double secs = seconds_since(t0);
  const bool ok = worst <= kRecurrenceTolerance && secs < kRecurrenceSeconds;
  return {ok ? Verdict::Pass : Verdict::Fail, std::to_string(kRecurrenceTrials) + " triples, worst relative error " +
                                                  sci(worst) + " (<= " + sci(kRecurrenceTolerance) + "), " +
                                                  fixed(secs, 3) + " s (< " + fixed(kRecurrenceSeconds, 0) + " s)"};
}

Outcome min_norm_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  int failures = 0;
  for (int t = 0; t < kMinNormInstances; ++t) {
    const std::size_t m = 1 + static_cast<std::size_t>(t % 2);
    std::vector<std::size_t> nodes(m);
    std::size_t unknowns = 0;
    for (auto& n : nodes) {
      n = 2 + static_cast<std::size_t>(rng() % 2);
      unknowns += n;
    }
    const std::size_t records = 2 + static_cast<std::size_t>(rng() % 19);

    Dataset data;
    for (std::size_t j = 0; j < m; ++j) data.inputs.push_back(ColumnSpec{"x" + std::to_string(j + 1)});
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(records), static_cast<Eigen::Index>(unknowns));
    for (std::size_t i = 0; i < records; ++i) {
      std::vector<double> x(m);
      std::size_t offset = 0;
      for (std::size_t j = 0; j < m; ++j) {
        x[j] = u(rng);
        const auto row = oracle::hat_row(0.0, 1.0, nodes[j], x[j]);
        for (std::size_t k = 0; k < nodes[j]; ++k)
          A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(offset + k)) = row[k];
        offset += nodes[j];
      }
      data.push_back(x, 0.0);
    }
    // Outputs generated by a hidden operator keep the system consistent.
    const Eigen::VectorXd hidden = Eigen::VectorXd::NullaryExpr(static_cast<Eigen::Index>(unknowns),
                                                                [&] { return 2.0 * u(rng) - 1.0; });
    const Eigen::VectorXd z = A * hidden;
    for (std::size_t i = 0; i < records; ++i) data.z[i] = z(static_cast<Eigen::Index>(i));
    const Eigen::VectorXd expected = oracle::min_norm_solution(A, z);

    std::vector<PiecewiseLinear> fs;
    for (const auto n : nodes) fs.emplace_back(0.0, 1.0, n);
    TrainConfig cfg;
    cfg.alpha = 1.0;
    cfg.epochs = kMinNormEpochs;
    cfg.seed = static_cast<std::uint64_t>(t);
    const auto op = train_single(UrysohnOperator(fs), data, cfg).first;

    double err = 0.0;
    std::size_t offset = 0;
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t k = 0; k < nodes[j]; ++k)
        err = std::max(err, std::abs(op[j][k] - expected(static_cast<Eigen::Index>(offset + k))));
      offset += nodes[j];
    }
    worst = std::max(worst, err);
    failures += err > kMinNormTolerance;
  }
  const double secs = seconds_since(t0);
  const bool ok = failures == 0 && secs < kMinNormSeconds;
  return {ok ? Verdict::Pass : Verdict::Fail,
          std::to_string(kMinNormInstances) + " instances, " + std::to_string(failures) + " outside tolerance, worst " +
              sci(worst) + " (<= " + sci(kMinNormTolerance) + "), " + fixed(secs, 2) + " s (< " +
              fixed(kMinNormSeconds, 0) + " s)"};
}

std::string describe_checks(const bench::Result& r) {
  std::ostringstream os;
  bool first = true;
  for (const auto& c : r.checks) {
    if (!first) os << "; ";
    first = false;
    os << c.label << ' ' << fixed(c.value) << (c.pass() ? "" : " [out of band]");
  }
  return os.str();
}

Outcome from_bench(const bench::Result& r) {
  if (r.status == bench::Status::FetchRequired) {
    std::string note = r.notes;
    while (!note.empty() && note.back() == '\n') note.pop_back();
    std::replace(note.begin(), note.end(), '\n', ' ');
    return {Verdict::Skip, "dataset not present: " + note};
  }
  return {r.status == bench::Status::Pass ? Verdict::Pass : Verdict::Fail,
          describe_checks(r) + " (" + fixed(r.seconds, 1) + " s)"};
}

Outcome synthetic(const bench::Options& opt) {
  auto r = bench::run_synthetic(opt);
  r.checks.push_back({"seconds", r.seconds, 0.0, kSyntheticSeconds, "< 120"});
  r.settle();
  return from_bench(r);
}

// Criterion 9 parts. Each returns an empty string on success.

std::string interpolation_exactness() {
  std::mt19937_64 rng(901);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int t = 0; t < 2000; ++t) {
    const double lo = u(rng);
    const double hi = lo + 1e-3 + std::abs(u(rng));
    const std::size_t n = 2 + static_cast<std::size_t>(t % 40);
    const auto v = uniform_values(rng, n, -10, 10);
    const PiecewiseLinear f(lo, hi, v);
    for (std::size_t k = 0; k < n; ++k)
      if (f(f.node_position(k)) != v[k]) return "node " + std::to_string(k) + " of trial " + std::to_string(t);
    const auto q = PiecewiseLinear::quantized(v);
    for (std::size_t k = 0; k < n; ++k)
      if (q(static_cast<double>(k + 1)) != v[k]) return "quantized level " + std::to_string(k + 1);
  }
  return {};
}

std::string quantized_degeneracy() {
  std::mt19937_64 rng(902);
  std::uniform_real_distribution<double> u(-5.0, 20.0);
  for (int t = 0; t < 2000; ++t) {
    const auto f = PiecewiseLinear::quantized(2 + static_cast<std::size_t>(t % 15));
    for (int s = 0; s < 20; ++s) {
      const double x = s % 2 ? u(rng) : std::round(u(rng));
      const auto loc = f.locate(x);
      if (loc.fraction != 0.0 || loc.ceiling != loc.floor) return "fraction " + sci(loc.fraction) + " at " + sci(x);
    }
  }
  return {};
}

std::string gate_immutability() {
  std::mt19937_64 rng(903);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t skipped = 0;
  for (int t = 0; t < 2000; ++t) {
    const std::size_t K = 1 + static_cast<std::size_t>(t % 4);
    UrysohnTree tree;
    for (std::size_t k = 0; k < K; ++k)
      tree.branches.push_back(UrysohnOperator({PiecewiseLinear(0, 1, uniform_values(rng, 4, -1, 1)),
                                               PiecewiseLinear(0, 1, uniform_values(rng, 3, -1, 1))}));
    std::vector<PiecewiseLinear> roots;
    for (std::size_t k = 0; k < K; ++k) roots.emplace_back(-2.0, 2.0, uniform_values(rng, 5, -1, 1));
    tree.root = UrysohnOperator(roots);
    const std::vector<double> x{u(rng), u(rng)};
    // Exact targets always skip; random targets skip when the gate rejects.
    const double z = t % 3 == 0 ? predict(tree, x) : 4.0 * u(rng) - 2.0;
    TreeConfig cfg;
    cfg.mu = 0.25 + 0.75 * u(rng);
    const auto before = tree;
    const auto r = tree_step(tree, x, z, cfg);
    if (!r.accepted) {
      ++skipped;
      if (!(tree == before)) return "skipped step modified the tree in trial " + std::to_string(t);
    }
  }
  if (skipped == 0) return "no skipped steps exercised";
  return {};
}

std::string linear_root_cancellation() {
  std::mt19937_64 rng(904);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t K = 1 + static_cast<std::size_t>(t % 11);
    std::vector<PiecewiseLinear> fs;
    for (std::size_t k = 0; k < K; ++k) {
      const double slope = (u(rng) > 0 ? 1 : -1) * (0.05 + std::abs(u(rng)));
      const double c = u(rng);
      fs.emplace_back(-1.0, 1.0, std::vector<double>{c - slope, c, c + slope});
    }
    UrysohnTree tree;
    tree.branches.assign(K, UrysohnOperator({PiecewiseLinear(0, 1, 2)}));
    tree.root = UrysohnOperator(fs);
    std::vector<double> phi(K);
    for (auto& p : phi) p = u(rng);
    const double z = 4.0 * u(rng);
    const double R = z - root_output(tree, phi);
    const auto d = phi_increments(tree, phi, R, 1.0, 1e-3);
    std::vector<double> shifted(K);
    for (std::size_t k = 0; k < K; ++k) shifted[k] = phi[k] + d[k];
    // Root functions are affine, so evaluation beyond the domain continues the line.
    double after = z;
    for (std::size_t k = 0; k < K; ++k) after -= fs[k].extrapolate(shifted[k]);
    if (std::abs(after) > kExactTolerance * std::max(1.0, std::abs(R)))
      return "residual " + sci(after) + " in trial " + std::to_string(t);
  }
  return {};
}

std::string reposition_oracle() {
  std::mt19937_64 rng(905);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t n = 2 + static_cast<std::size_t>(t % 14);
    const auto v = uniform_values(rng, n, -1, 1);
    const double lo = -u(rng), hi = 0.1 + u(rng);
    const double target = u(rng) < 0.5 ? lo - 3 * u(rng) - 1e-3 : hi + 3 * u(rng) + 1e-3;
    const auto f = reposition_root_domain(PiecewiseLinear(lo, hi, v), target);
    const auto expected = oracle::regrid(lo, hi, v, std::min(lo, target), std::max(hi, target));
    if (!f.contains(target)) return "target outside new domain in trial " + std::to_string(t);
    for (std::size_t k = 0; k < n; ++k)
      if (std::abs(f[k] - expected[k]) > kRegridTolerance) return "node mismatch in trial " + std::to_string(t);
  }
  return {};
}

std::string serialization_round_trip() {
  const auto data = synth_generate(400, 905);
  std::mt19937_64 rng(906);
  std::uniform_real_distribution<double> u(-0.5, 2.0);
  for (const auto type : {ModelType::Tree, ModelType::Urysohn, ModelType::Linear}) {
    RunConfig cfg;
    cfg.model = type;
    cfg.addends = 3;
    cfg.epochs = 5;
    const auto model = train_model(data, cfg, 7).model;
    std::istringstream in(save_model_string(model));
    const auto loaded = load_model(in);
    for (int i = 0; i < 2000; ++i) {
      std::vector<double> x(data.input_count());
      for (auto& v : x) v = u(rng);
      if (model.predict(x) != loaded.predict(x)) return "prediction differs after reload";
    }
  }
  return {};
}

Outcome structural_invariants() {
  const std::vector<std::pair<std::string, std::function<std::string()>>> parts{
      {"interpolation exactness", interpolation_exactness},
      {"quantized fraction zero", quantized_degeneracy},
      {"gate immutability", gate_immutability},
      {"linear-root cancellation", linear_root_cancellation},
      {"repositioning oracle", reposition_oracle},
      {"serialization round trip", serialization_round_trip},
  };
  std::string failed;
  for (const auto& [name, check] : parts) {
    const auto why = check();
    if (!why.empty()) failed += (failed.empty() ? "" : "; ") + name + ": " + why;
  }
  if (!failed.empty()) return {Verdict::Fail, failed};
  return {Verdict::Pass, std::to_string(parts.size()) + " invariant groups hold"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  bench::Options opt;
  opt.jobs = std::max(1u, std::thread::hardware_concurrency());
  std::string data_dir = "data";
  std::vector<int> only;
  std::vector<int> expect_fail;
  app.add_option("--data-dir", data_dir, "Directory holding the fetched datasets");
  app.add_option("--seed", opt.seed, "Base seed");
  app.add_option("--jobs", opt.jobs, "Worker threads");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--expect-fail", expect_fail, "Criteria known to fail")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  opt.data_dir = data_dir;

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, residual_recurrence},
      {2, min_norm_equivalence},
      {3, [&] { return synthetic(opt); }},
      {4, [&] { return from_bench(bench::run_reduction(opt)); }},
      {5, [&] { return from_bench(bench::run_airfoil(opt)); }},
      {6, [&] { return from_bench(bench::run_mushroom(opt)); }},
      {7, [&] { return from_bench(bench::run_wiener_hammerstein(opt)); }},
      {8, [&] { return from_bench(bench::run_bank_churn(opt)); }},
      {9, structural_invariants},
  };
  const std::set<int> selected(only.begin(), only.end());
  const std::set<int> known(expect_fail.begin(), expect_fail.end());

  int unexpected = 0;
  for (const auto& [id, run] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {Verdict::Fail, std::string("error: ") + e.what()};
    }
    const char* word = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Fail ? "FAIL" : "SKIP";
    std::cout << word << " criterion " << id << ": " << o.detail;
    if (known.count(id)) std::cout << " [known failure]";
    std::cout << std::endl;
    const bool failed = o.verdict == Verdict::Fail;
    if (known.count(id) ? o.verdict == Verdict::Pass : failed) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
