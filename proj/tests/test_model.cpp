#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "dhsense/checkpoint.hpp"
#include "dhsense/error.hpp"
#include "dhsense/model.hpp"
#include "dhsense/ops.hpp"
#include "dhsense/optim.hpp"
#include "dhsense/train.hpp"
#include "support.hpp"

using namespace dhsense;
using testing::random_matrix;

namespace {

constexpr std::size_t kNodes = 5, kWindow = 4, kTargets = 2;

std::vector<GraphSample> random_samples(std::size_t count, std::mt19937_64& rng) {
  std::vector<GraphSample> out(count);
  for (auto& s : out) {
    s.x = random_matrix(kNodes, kWindow, rng, 0.5);
    s.adjacency = build_adjacency(s.x).weights;
    s.y = random_matrix(kTargets, 1, rng);
  }
  return out;
}

ModelConfig small_config(Architecture arch, std::uint64_t seed = 0) {
  ModelConfig c;
  c.architecture = arch;
  c.graph_hidden = 3;
  c.mlp_hidden = 6;
  c.heads = 2;
  c.cheb_order = 2;
  c.window = kWindow;
  c.cnn_channels = 2;
  c.seed = seed;
  return c;
}

Eigen::MatrixXd run(const Model& m, const std::vector<GraphSample>& samples) {
  return testing::matrix_of(m.forward(prepare_batch(block_diag_batch(samples), m.config())).value());
}

// Independent transcription of the PyTorch NAdam step.
struct NadamOracle {
  double lr, b1 = 0.9, b2 = 0.999, eps = 1e-8, psi = 4e-3;
  double m = 0, v = 0, mu_prod = 1;
  int t = 0;
  double step(double p, double g) {
    ++t;
    const double mu = b1 * (1 - 0.5 * std::pow(0.96, t * psi));
    const double mu_next = b1 * (1 - 0.5 * std::pow(0.96, (t + 1) * psi));
    mu_prod *= mu;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double denom = std::sqrt(v / (1 - std::pow(b2, t))) + eps;
    p -= lr * (1 - mu) / (1 - mu_prod) * g / denom;
    p -= lr * mu_next / (1 - mu_prod * mu_next) * m / denom;
    return p;
  }
};

}  // namespace

TEST_SUITE("model") {

TEST_CASE("output shape and per-sample independence") {
  std::mt19937_64 rng(5);
  auto samples = random_samples(3, rng);
  for (auto arch : all_architectures()) {
    CAPTURE(architecture_name(arch));
    Model m(small_config(arch), kNodes, kTargets);
    const auto batched = run(m, samples);
    REQUIRE(batched.rows() == 3);
    REQUIRE(batched.cols() == static_cast<Eigen::Index>(kTargets));
    for (std::size_t s = 0; s < 3; ++s) {
      const auto single = run(m, {samples[s]});
      CHECK((batched.row(static_cast<Eigen::Index>(s)) - single).cwiseAbs().maxCoeff() < 1e-9);
    }
    auto changed = samples;
    changed[2].x = random_matrix(kNodes, kWindow, rng, 0.5);
    changed[2].adjacency = build_adjacency(changed[2].x).weights;
    const auto other = run(m, changed);
    CHECK((other.topRows(2) - batched.topRows(2)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((other.row(2) - batched.row(2)).cwiseAbs().maxCoeff() > 1e-9);
  }
}

TEST_CASE("shape errors") {
  std::mt19937_64 rng(6);
  Model m(small_config(Architecture::gatv2), kNodes, kTargets);
  Model wrong_nodes(small_config(Architecture::gatv2), kNodes + 1, kTargets);
  const auto batch = prepare_batch(block_diag_batch(random_samples(2, rng)), m.config());
  CHECK_NOTHROW(m.forward(batch));
  CHECK_THROWS_AS(wrong_nodes.forward(batch), ShapeError);
  Model wrong_targets(small_config(Architecture::gatv2), kNodes, kTargets + 1);
  CHECK_THROWS_AS(wrong_targets.forward(batch), ShapeError);
  auto bad = small_config(Architecture::cnn);
  bad.cnn_kernel = 2;
  CHECK_THROWS_AS(Model(bad, kNodes, kTargets), ConfigError);
  CHECK_THROWS_AS(parse_architecture("lstm"), ConfigError);
}

TEST_CASE("full-model gradients against finite differences") {
  for (auto arch : all_architectures()) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      CAPTURE(architecture_name(arch));
      CAPTURE(seed);
      std::mt19937_64 rng(100 + seed);
      Model m(small_config(arch, seed), kNodes, kTargets);
      const auto batch = prepare_batch(block_diag_batch(random_samples(2, rng)), m.config());
      const double err = testing::gradient_check(m.parameters(), [&] { return mse_loss(m.forward(batch), batch.y); });
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("NAdam matches a hand-written step on w^2") {
  NadamOptions opts;
  opts.learning_rate = 0.05;
  NadamSlot slot;
  NadamOracle oracle{opts.learning_rate};
  double w = 1.0, expected = 1.0;
  for (int t = 0; t < 25; ++t) {
    const double g = 2 * w;
    nadam_update(&w, &g, 1, slot, opts);
    expected = oracle.step(expected, 2 * expected);
    CHECK(std::abs(w - expected) < 1e-14);
  }
  CHECK(slot.step == 25);
  CHECK(std::abs(w) < 1.0);
}

TEST_CASE("NAdam edge cases") {
  NadamOptions opts;
  NadamSlot slot;
  std::vector<double> p{0.5, -1.5}, g{0.0, 0.0};
  nadam_update(p.data(), g.data(), 2, slot, opts);
  CHECK(p[0] == 0.5);
  CHECK(p[1] == -1.5);

  std::vector<double> bad{0.0, NAN};
  CHECK_THROWS_AS(nadam_update(p.data(), bad.data(), 2, slot, opts, "w"), NumericalError);

  std::vector<double> a{1, 2, 3}, b{1, 2, 3}, grad{0.3, -0.1, 2.0};
  NadamSlot sa, sb;
  for (int i = 0; i < 5; ++i) {
    nadam_update(a.data(), grad.data(), 3, sa, opts);
    nadam_update(b.data(), grad.data(), 3, sb, opts);
  }
  CHECK(a == b);

  // the optimizer wrapper treats a parameter without gradient as zero gradient
  auto x = parameter(Tensor({2}, {1.0, 2.0}));
  Nadam opt({x}, opts);
  opt.zero_grad();
  opt.step();
  CHECK(x.value().data == Buffer{1.0, 2.0});
}

TEST_CASE("early stopping counts stale epochs") {
  EarlyStopping s(3);
  CHECK(s.update(1.0));
  CHECK_FALSE(s.update(1.0));  // equal is not an improvement
  CHECK_FALSE(s.update(2.0));
  CHECK_FALSE(s.should_stop());
  CHECK(s.update(0.5));
  CHECK(s.stale() == 0);
  CHECK(s.best_epoch() == 3);
  for (int i = 0; i < 3; ++i) s.update(0.6);
  CHECK(s.should_stop());
  CHECK(s.best() == 0.5);

  EarlyStopping improving(2);
  for (int i = 0; i < 50; ++i) {
    CHECK(improving.update(1.0 / (i + 1)));
    CHECK_FALSE(improving.should_stop());
  }
}

TEST_CASE("a linear model fits a linear target") {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd coef = random_matrix(2, 4, rng);  // targets x (nodes * window)
  auto make = [&](std::size_t count) {
    std::vector<GraphSample> s(count);
    for (auto& g : s) {
      g.x = random_matrix(2, 2, rng);
      const Eigen::MatrixXd xt = g.x;
      Eigen::VectorXd flat(4);
      for (int i = 0; i < 4; ++i) flat(i) = xt(i / 2, i % 2);
      g.y = coef * flat;
    }
    return s;
  };
  ModelConfig c;
  c.architecture = Architecture::mlp;
  c.activation = Activation::identity;
  c.window = 2;
  c.mlp_hidden = 4;
  c.learning_rate = 1e-2;
  c.max_epochs = 3000;
  c.patience = 3000;
  Model m(c, 2, 2);
  const auto tr = make(32), va = make(16);
  std::vector<PreparedBatch> train_b{prepare_batch(block_diag_batch(std::vector<GraphSample>(tr.begin(), tr.begin() + 16)), c),
                                     prepare_batch(block_diag_batch(std::vector<GraphSample>(tr.begin() + 16, tr.end())), c)};
  std::vector<PreparedBatch> val_b{prepare_batch(block_diag_batch(va), c)};
  const auto res = train(m, train_b, val_b);
  CHECK(evaluate_loss(m, val_b) < 1e-6);
  CHECK(evaluate_loss(m, val_b) == doctest::Approx(res.best_val_loss).epsilon(1e-12));
  CHECK(res.history.size() <= c.max_epochs);
  const auto pred = predict(m, val_b);
  CHECK(pred.rows() == 16);
}

TEST_CASE("checkpoint round trip") {
  std::mt19937_64 rng(10);
  const auto samples = random_samples(2, rng);
  const auto dir = std::filesystem::temp_directory_path() / "dhsense_ckpt_test";
  std::filesystem::create_directories(dir);
  for (auto arch : all_architectures()) {
    CAPTURE(architecture_name(arch));
    Model a(small_config(arch, 1), kNodes, kTargets);
    Model b(small_config(arch, 2), kNodes, kTargets);
    const auto path = dir / (architecture_name(arch) + ".json");
    save_checkpoint(a, path);
    load_checkpoint(b, path);
    CHECK((run(a, samples) - run(b, samples)).cwiseAbs().maxCoeff() == 0.0);
    const auto named = named_parameters(a);
    const auto back = checkpoint_from_string(checkpoint_to_string(named));
    REQUIRE(back.size() == named.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].name == named[i].name);
      CHECK(back[i].tensor.shape == named[i].tensor.shape);
      CHECK(back[i].tensor.data == named[i].tensor.data);
    }
  }
  Model gat(small_config(Architecture::gatv2), kNodes, kTargets);
  Model wide(small_config(Architecture::gatv2), kNodes + 1, kTargets);
  CHECK_THROWS_AS(load_checkpoint(gat, dir / "mlp.json"), SchemaError);
  CHECK_THROWS_AS(load_checkpoint(wide, dir / "gatv2.json"), SchemaError);
  CHECK_THROWS_AS(checkpoint_from_string("{\"format\": \"other\", \"tensors\": []}"), SchemaError);
  std::filesystem::remove_all(dir);
}

}
