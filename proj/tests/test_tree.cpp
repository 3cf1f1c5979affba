#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "urysohn/metrics.hpp"
#include "urysohn/tree.hpp"

using namespace urysohn;

namespace {

Dataset blank(std::size_t m) {
  Dataset d;
  for (std::size_t j = 0; j < m; ++j) d.inputs.push_back(ColumnSpec{"x" + std::to_string(j + 1), ColumnRole::Input});
  return d;
}

PiecewiseLinear random_function(std::mt19937_64& rng, double lo, double hi, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& y : v) y = u(rng);
  return {lo, hi, v};
}

/// Root functions Phi(phi) = phi on [lo, hi].
UrysohnOperator identity_root(std::size_t K, double lo, double hi) {
  std::vector<PiecewiseLinear> fs(K, PiecewiseLinear(lo, hi, std::vector<double>{lo, hi}));
  return UrysohnOperator(fs);
}

}  // namespace

TEST(Threshold, Cases) {
  EXPECT_EQ(threshold_derivative(0.5, 0.01), 0.5);
  EXPECT_EQ(threshold_derivative(0.001, 0.01), 0.01);
  EXPECT_EQ(threshold_derivative(-0.001, 0.01), -0.01);
  EXPECT_EQ(threshold_derivative(0.0, 0.01), 0.01);
  EXPECT_EQ(threshold_derivative(-0.01, 0.01), -0.01);
  EXPECT_EQ(threshold_derivative(-3.0, 0.01), -3.0);
}

TEST(Forward, ZeroTree) {
  UrysohnTree t;
  t.branches.assign(3, UrysohnOperator({PiecewiseLinear(0, 1, 4), PiecewiseLinear(0, 1, 4)}));
  t.root = UrysohnOperator(std::vector<PiecewiseLinear>(3, PiecewiseLinear(-1, 1, 5)));
  const auto [z, phi] = forward(t, std::vector<double>{0.2, 0.8});
  EXPECT_EQ(z, 0.0);
  for (const double p : phi) EXPECT_EQ(p, 0.0);
}

TEST(Forward, IdentityRootEqualsBranch) {
  std::mt19937_64 rng(1);
  UrysohnTree t;
  t.branches = {UrysohnOperator({random_function(rng, 0, 1, 5), random_function(rng, 0, 1, 3)})};
  t.root = identity_root(1, -5.0, 5.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int s = 0; s < 100; ++s) {
    const std::vector<double> x{u(rng), u(rng)};
    EXPECT_NEAR(predict(t, x), t.branches[0].evaluate(x), 1e-14);
  }
}

TEST(Forward, MatchesNestedSum) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    UrysohnTree t;
    std::vector<std::vector<std::vector<double>>> inner(2);
    std::vector<std::vector<double>> outer;
    for (int k = 0; k < 2; ++k) {
      std::vector<PiecewiseLinear> fs;
      for (int j = 0; j < 2; ++j) {
        std::vector<double> v{u(rng), u(rng), u(rng)};
        inner[k].push_back(v);
        fs.emplace_back(0.0, 1.0, v);
      }
      t.branches.emplace_back(fs);
      outer.push_back({u(rng), u(rng), u(rng)});
    }
    t.root = UrysohnOperator({PiecewiseLinear(0.0, 2.0, outer[0]), PiecewiseLinear(0.0, 2.0, outer[1])});
    for (int s = 0; s < 50; ++s) {
      const std::vector<double> x{u(rng), u(rng)};
      double expected = 0.0;
      for (int k = 0; k < 2; ++k) {
        const double phi = oracle::pwl_value(0, 1, inner[k][0], x[0]) + oracle::pwl_value(0, 1, inner[k][1], x[1]);
        expected += oracle::pwl_value(0, 2, outer[k], phi);
      }
      EXPECT_NEAR(predict(t, x), expected, 1e-13);
    }
  }
}

TEST(PhiIncrements, UnitSlopes) {
  UrysohnTree t;
  t.branches.assign(3, UrysohnOperator({PiecewiseLinear(0, 1, 2)}));
  t.root = identity_root(3, -1.0, 1.0);
  const std::vector<double> phi{0.0, 0.2, -0.3};
  for (const double d : phi_increments(t, phi, 0.3, 1.0, 0.01)) EXPECT_NEAR(d, 0.1, 1e-15);
  for (const double d : phi_increments(t, phi, 0.0, 1.0, 0.01)) EXPECT_EQ(d, 0.0);
}

TEST(PhiIncrements, LinearRootCancelsResidual) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t K = 1 + trial % 6;
    std::vector<PiecewiseLinear> fs;
    for (std::size_t k = 0; k < K; ++k) {
      const double slope = (u(rng) > 0 ? 1 : -1) * (0.1 + std::abs(u(rng)));
      const double c = u(rng);
      fs.emplace_back(-1.0, 1.0, std::vector<double>{c - slope, c, c + slope});
    }
    UrysohnTree t;
    t.branches.assign(K, UrysohnOperator({PiecewiseLinear(0, 1, 2)}));
    t.root = UrysohnOperator(fs);
    std::vector<double> phi(K);
    for (auto& p : phi) p = u(rng);
    const double z = 3.0 * u(rng);
    const double R = z - root_output(t, phi);
    const auto d = phi_increments(t, phi, R, 1.0, 1e-3);
    std::vector<double> shifted(K);
    for (std::size_t k = 0; k < K; ++k) {
      shifted[k] = phi[k] + d[k];
      // Increment direction follows R times the root slope.
      if (R != 0.0) {
        EXPECT_EQ(std::signbit(d[k]), std::signbit(R * fs[k].slope(phi[k])));
      }
    }
    EXPECT_NEAR(z - root_output(t, shifted), 0.0, 1e-10);
  }
}

TEST(Reposition, ExtendLeft) {
  const auto f = reposition_root_domain(PiecewiseLinear(0.0, 1.0, std::vector<double>{0.0, 2.0}), -1.0);
  EXPECT_EQ(f.domain_min(), -1.0);
  EXPECT_EQ(f.domain_max(), 1.0);
  EXPECT_DOUBLE_EQ(f[0], -2.0);
  EXPECT_DOUBLE_EQ(f[1], 2.0);
}

TEST(Reposition, InsideIsNoOp) {
  const PiecewiseLinear f(0.0, 1.0, std::vector<double>{0.3, 2.0, -1.0});
  EXPECT_EQ(reposition_root_domain(f, 0.4), f);
  EXPECT_EQ(reposition_root_domain(f, 1.0), f);
}

TEST(Reposition, ExtendRightThreeNodes) {
  const auto f = reposition_root_domain(PiecewiseLinear(0.0, 2.0, std::vector<double>{0.0, 1.0, 0.0}), 3.0);
  EXPECT_EQ(f.domain_max(), 3.0);
  EXPECT_EQ(f.size(), 3u);
  EXPECT_DOUBLE_EQ(f.node_position(1), 1.5);
  EXPECT_DOUBLE_EQ(f[0], 0.0);
  EXPECT_DOUBLE_EQ(f[1], 0.5);
  EXPECT_DOUBLE_EQ(f[2], -1.0);
}

TEST(Reposition, MatchesRegridOracle) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + trial % 10;
    std::vector<double> v(n);
    for (auto& y : v) y = 2 * u(rng) - 1;
    const double lo = -u(rng), hi = 0.1 + u(rng);
    const double target = u(rng) < 0.5 ? lo - 3 * u(rng) - 1e-3 : hi + 3 * u(rng) + 1e-3;
    const auto f = reposition_root_domain(PiecewiseLinear(lo, hi, v), target);
    const auto expected = oracle::regrid(lo, hi, v, std::min(lo, target), std::max(hi, target));
    EXPECT_TRUE(f.contains(target));
    for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(f[k], expected[k], 1e-12) << trial << ' ' << k;
  }
}

TEST(TreeStep, ExactRecordSkippedUnchanged) {
  std::mt19937_64 rng(5);
  UrysohnTree t;
  t.branches = {UrysohnOperator({random_function(rng, 0, 1, 4)}), UrysohnOperator({random_function(rng, 0, 1, 4)})};
  t.root = UrysohnOperator({random_function(rng, -2, 2, 5), random_function(rng, -2, 2, 5)});
  const std::vector<double> x{0.37};
  const double z = predict(t, x);
  const auto before = t;
  const auto r = tree_step(t, x, z, TreeConfig{});
  EXPECT_FALSE(r.accepted);
  EXPECT_EQ(t, before);
}

TEST(TreeStep, LinearRootAccepted) {
  UrysohnTree t;
  t.branches = {UrysohnOperator({PiecewiseLinear(0, 1, std::vector<double>{0.1, 0.4})}),
                UrysohnOperator({PiecewiseLinear(0, 1, std::vector<double>{-0.2, 0.3})})};
  t.root = identity_root(2, -1.0, 1.0);
  TreeConfig cfg;
  cfg.mu = 1.0;
  const std::vector<double> x{0.5};
  const double before = std::abs(0.9 - predict(t, x));
  const auto r = tree_step(t, x, 0.9, cfg);
  EXPECT_TRUE(r.accepted);
  EXPECT_LT(std::abs(0.9 - predict(t, x)), before);
}

TEST(TreeStep, GateRejectsCrossingVertex) {
  // Root is a V with its vertex at 0; phi sits just left of it. The target
  // lies below the V, so the increment overshoots onto the rising side.
  UrysohnTree t;
  t.branches = {UrysohnOperator({PiecewiseLinear(0, 1, std::vector<double>{-0.1, -0.1})})};
  t.root = UrysohnOperator({PiecewiseLinear(-1.0, 1.0, std::vector<double>{1.0, 0.0, 1.0})});
  TreeConfig cfg;
  cfg.mu = 1.0;
  const auto before = t;
  const std::vector<double> x{0.5};
  const auto r = tree_step(t, x, -0.5, cfg);
  EXPECT_FALSE(r.accepted);
  EXPECT_NEAR(r.residual, -0.6, 1e-15);
  EXPECT_EQ(t, before);
}

TEST(TreeStep, RootDomainsFollowTargets) {
  UrysohnTree t;
  t.branches = {UrysohnOperator({PiecewiseLinear(0, 1, std::vector<double>{0.9, 0.9})})};
  t.root = identity_root(1, -1.0, 1.0);
  TreeConfig cfg;
  cfg.mu = 1.0;
  const auto r = tree_step(t, std::vector<double>{0.2}, 1.5, cfg);
  ASSERT_TRUE(r.accepted);
  EXPECT_DOUBLE_EQ(t.root[0].domain_max(), 1.5);
}

namespace {

Dataset tree_data(const UrysohnTree& truth, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto d = blank(truth.input_count());
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> x(truth.input_count());
    for (auto& xi : x) xi = u(rng);
    d.push_back(x, predict(truth, x));
  }
  d.finalize();
  return d;
}

UrysohnTree random_tree(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  UrysohnTree t;
  for (int k = 0; k < 3; ++k) t.branches.emplace_back(std::vector{random_function(rng, 0, 1, 3), random_function(rng, 0, 1, 3)});
  t.root = UrysohnOperator({random_function(rng, -2, 2, 3), random_function(rng, -2, 2, 3), random_function(rng, -2, 2, 3)});
  return t;
}

}  // namespace

TEST(Initialize, BranchesDistinct) {
  const auto data = tree_data(random_tree(6), 200, 7);
  TreeConfig cfg;
  cfg.addends = 5;
  const auto t = initialize_tree(data, input_ranges(data), cfg);
  ASSERT_EQ(t.addend_count(), 5u);
  for (std::size_t a = 0; a < 5; ++a)
    for (std::size_t b = a + 1; b < 5; ++b) EXPECT_NE(t.branches[a], t.branches[b]);
}

TEST(Initialize, DefaultAddendCount) {
  const auto data = tree_data(random_tree(6), 50, 7);
  const auto t = initialize_tree(data, input_ranges(data), TreeConfig{});
  EXPECT_EQ(t.addend_count(), 5u);
}

TEST(Initialize, SingleAddend) {
  const auto data = tree_data(random_tree(6), 50, 7);
  TreeConfig cfg;
  cfg.addends = 1;
  const auto t = initialize_tree(data, input_ranges(data), cfg);
  EXPECT_EQ(t.addend_count(), 1u);
  EXPECT_EQ(t.root.input_count(), 1u);
}

TEST(Initialize, Deterministic) {
  const auto data = tree_data(random_tree(6), 100, 7);
  TreeConfig cfg;
  cfg.seed = 99;
  EXPECT_EQ(initialize_tree(data, input_ranges(data), cfg), initialize_tree(data, input_ranges(data), cfg));
  auto other = cfg;
  other.seed = 100;
  EXPECT_NE(initialize_tree(data, input_ranges(data), cfg), initialize_tree(data, input_ranges(data), other));
}

TEST(TrainTree, RecoversSmallTree) {
  const auto truth = random_tree(8);
  const auto train = tree_data(truth, 1000, 9);
  const auto valid = tree_data(truth, 300, 10);
  TreeConfig cfg;
  cfg.addends = 3;
  cfg.branch_nodes = {6};
  cfg.root_nodes = 8;
  cfg.mu = 0.5;
  cfg.alpha_root = 0.1;
  cfg.epochs = 100;
  cfg.seed = 1;
  const auto [t, trace] = train_tree(train, input_ranges(train), cfg);
  std::vector<double> z_hat;
  for (std::size_t i = 0; i < valid.size(); ++i) z_hat.push_back(predict(t, valid.row(i)));
  const auto p = pearson(valid.z, z_hat);
  ASSERT_TRUE(p.has_value());
  EXPECT_GE(*p, 0.99);
  EXPECT_EQ(trace.epoch_mean_abs_residual.size(), 100u);
  EXPECT_EQ(trace.epoch_skip_rate.size(), 100u);
}

TEST(TrainTree, RootDomainsCoverTrainingPhi) {
  const auto data = tree_data(random_tree(11), 400, 12);
  TreeConfig cfg;
  cfg.addends = 4;
  cfg.epochs = 10;
  const auto [t, trace] = train_tree(data, input_ranges(data), cfg);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto [z, phi] = forward(t, data.row(i));
    for (std::size_t k = 0; k < phi.size(); ++k) EXPECT_TRUE(t.root[k].contains(phi[k]));
  }
}

TEST(TrainTree, EmptyDataRejected) {
  const auto d = blank(2);
  const std::vector<Range> r(2, Range{0, 1});
  EXPECT_THROW(train_tree(d, r, TreeConfig{}), DataError);
}

TEST(TrainTree, ConfigValidation) {
  TreeConfig cfg;
  cfg.mu = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.mu = 1.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = TreeConfig{};
  cfg.delta = -1e-3;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = TreeConfig{};
  cfg.alpha_root = 2.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(TrainTree, SingleAddendIdentityRootMatchesSingleOperator) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto data = blank(3);
  for (int i = 0; i < 500; ++i) {
    const std::vector<double> x{u(rng), u(rng), u(rng)};
    data.push_back(x, 1.5 * x[0] - 0.7 * x[1] + 0.4 * x[2] + 0.05 * (u(rng) - 0.5));
  }
  data.finalize();
  const auto ranges = input_ranges(data);

  TrainConfig single_cfg;
  single_cfg.nodes_per_input = {2};
  single_cfg.epochs = 50;
  const auto single = train_single(make_linear_baseline(ranges), data, single_cfg).first;

  UrysohnTree t;
  t.branches = {make_linear_baseline(ranges)};
  t.root = identity_root(1, data.output.min, data.output.max);
  TreeConfig cfg;
  cfg.mu = 0.5;
  cfg.epochs = 50;
  const auto tree = train_tree(std::move(t), data, cfg).first;

  std::vector<double> a, b;
  for (std::size_t i = 0; i < data.size(); ++i) {
    a.push_back(single.evaluate(data.row(i)));
    b.push_back(predict(tree, data.row(i)));
  }
  const double pa = *pearson(data.z, a);
  const double pb = *pearson(data.z, b);
  EXPECT_GT(pa, 0.99);
  EXPECT_NEAR(pa, pb, 0.005);
}
