#include <doctest.h>

#include <cmath>
#include <complex>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

#include "dhsense/attention.hpp"
#include "dhsense/error.hpp"
#include "dhsense/layers.hpp"
#include "dhsense/ops.hpp"
#include "dhsense/spectral.hpp"
#include "support.hpp"

using namespace dhsense;
using testing::gradient_check;
using testing::projection;
using testing::random_adjacency;
using testing::random_matrix;
using testing::random_tensor;

namespace {

using cd = std::complex<double>;
constexpr int kSeeds = 10;
constexpr double kLayerTol = 1e-4;

double lrelu(double z, double slope) { return z > 0 ? z : slope * z; }

// Straight loops over the dense adjacency, one node and head at a time.
Eigen::MatrixXd gatv2_oracle(const Eigen::MatrixXd& x, const Eigen::MatrixXd& a, const Eigen::MatrixXd& w_src,
                             const Eigen::MatrixXd& w_dst, const Eigen::MatrixXd& att, int heads, double slope,
                             Eigen::MatrixXd* alpha_sum = nullptr) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(att.cols());
  const Eigen::MatrixXd l = x * w_src, r = x * w_dst;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, heads * d);
  if (alpha_sum) *alpha_sum = Eigen::MatrixXd::Zero(n, heads);
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < n; ++i) {
      std::vector<double> e(static_cast<std::size_t>(n), -INFINITY);
      double mx = -INFINITY;
      for (int j = 0; j < n; ++j) {
        if (a(i, j) == 0) continue;
        double s = 0;
        for (int c = 0; c < d; ++c) s += att(h, c) * lrelu(r(i, h * d + c) + l(j, h * d + c), slope);
        e[static_cast<std::size_t>(j)] = s;
        mx = std::max(mx, s);
      }
      double z = 0;
      for (int j = 0; j < n; ++j) {
        if (a(i, j) != 0) z += std::exp(e[static_cast<std::size_t>(j)] - mx);
      }
      for (int j = 0; j < n; ++j) {
        if (a(i, j) == 0) continue;
        const double alpha = std::exp(e[static_cast<std::size_t>(j)] - mx) / z;
        if (alpha_sum) (*alpha_sum)(i, h) += alpha;
        for (int c = 0; c < d; ++c) out(i, h * d + c) += alpha * l(j, h * d + c);
      }
    }
  }
  return out;
}

Eigen::MatrixXd transformer_oracle(const Eigen::MatrixXd& x, const Eigen::MatrixXd& a, const Eigen::MatrixXd& w1,
                                   const Eigen::MatrixXd& w2, const Eigen::MatrixXd& w3, const Eigen::MatrixXd& w4,
                                   int heads) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(w3.cols()) / heads;
  const Eigen::MatrixXd q = x * w3, k = x * w4, v = x * w2;
  Eigen::MatrixXd out = x * w1;
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < n; ++i) {
      double z = 0;
      std::vector<double> e(static_cast<std::size_t>(n), 0.0);
      for (int j = 0; j < n; ++j) {
        if (a(i, j) == 0) continue;
        double s = 0;
        for (int c = 0; c < d; ++c) s += q(i, h * d + c) * k(j, h * d + c);
        e[static_cast<std::size_t>(j)] = std::exp(s / std::sqrt(static_cast<double>(d)));
        z += e[static_cast<std::size_t>(j)];
      }
      for (int j = 0; j < n; ++j) {
        if (a(i, j) == 0) continue;
        for (int c = 0; c < d; ++c) out(i, h * d + c) += e[static_cast<std::size_t>(j)] / z * v(j, h * d + c);
      }
    }
  }
  return out;
}

Eigen::MatrixXd value(const Var& v) { return testing::matrix_of(v.value()); }
Var cst(const Eigen::MatrixXd& m) { return constant(testing::tensor_of(m)); }
Var prm(const Eigen::MatrixXd& m) { return parameter(testing::tensor_of(m)); }

std::shared_ptr<const std::vector<Eigen::MatrixXd>> one(const Eigen::MatrixXd& m) {
  return std::make_shared<const std::vector<Eigen::MatrixXd>>(std::vector<Eigen::MatrixXd>{m});
}

Eigen::MatrixXd scaled_of(const Eigen::MatrixXd& a) {
  const auto l = normalized_laplacian(a).matrix;
  return scaled_laplacian(l, power_iteration_lambda_max(l).value);
}

Eigen::MatrixXd permutation(int n, std::mt19937_64& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) p(i, idx[static_cast<std::size_t>(i)]) = 1.0;
  return p;
}

// Explicit frequency operator as n complex d_in x d_out matrices.
std::vector<ComplexRowMatrix> split_operator(const Tensor& re, const Tensor& im) {
  const std::size_t n = re.shape[0], din = re.shape[1], dout = re.shape[2];
  std::vector<ComplexRowMatrix> s(n, ComplexRowMatrix(din, dout));
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t e = 0; e < din * dout; ++e) s[k].data()[e] = cd(re.data[k * din * dout + e], im.data[k * din * dout + e]);
  }
  return s;
}

// S_k = c_hat_k W: the frequency form of a circulant A with first column c.
void circulant_operator(const Eigen::VectorXd& c, const Eigen::MatrixXd& w, Tensor& re, Tensor& im) {
  const auto n = static_cast<std::size_t>(c.size());
  const auto din = static_cast<std::size_t>(w.rows()), dout = static_cast<std::size_t>(w.cols());
  re = Tensor({n, din, dout});
  im = Tensor({n, din, dout});
  for (std::size_t k = 0; k < n; ++k) {
    cd ck = 0;
    for (std::size_t t = 0; t < n; ++t) {
      ck += c(static_cast<Eigen::Index>(t)) * std::polar(1.0, -2.0 * M_PI * static_cast<double>((k * t) % n) / static_cast<double>(n));
    }
    for (std::size_t i = 0; i < din; ++i) {
      for (std::size_t j = 0; j < dout; ++j) {
        const cd v = ck * w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        re.data[(k * din + i) * dout + j] = v.real();
        im.data[(k * din + i) * dout + j] = v.imag();
      }
    }
  }
}

}  // namespace

TEST_SUITE("layers") {

TEST_CASE("normalized Laplacian of K2") {
  Eigen::MatrixXd a(2, 2);
  a << 0, 1, 1, 0;
  const auto l = normalized_laplacian(a);
  Eigen::MatrixXd expected(2, 2);
  expected << 1, -1, -1, 1;
  CHECK((l.matrix - expected).cwiseAbs().maxCoeff() < 1e-15);
  const auto lam = power_iteration_lambda_max(l.matrix);
  CHECK_FALSE(lam.fallback);
  CHECK(lam.value == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("degenerate spectra fall back to 2") {
  const auto l = normalized_laplacian(Eigen::MatrixXd::Identity(4, 4));
  CHECK(l.matrix.isZero(0.0));
  const auto lam = power_iteration_lambda_max(l.matrix);
  CHECK(lam.fallback);
  CHECK(lam.value == 2.0);
  CHECK_THROWS_AS(scaled_laplacian(l.matrix, 0.0), DomainError);

  Eigen::MatrixXd iso = Eigen::MatrixXd::Zero(3, 3);
  iso(0, 1) = iso(1, 0) = 1.0;
  const auto li = normalized_laplacian(iso);
  CHECK(li.isolated == 1);
  CHECK(li.matrix(2, 2) == 0.0);
}

TEST_CASE("power iteration against a dense eigensolver") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    const auto l = normalized_laplacian(random_adjacency(10, rng, 0.4)).matrix;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l);
    const auto lam = power_iteration_lambda_max(l);
    CAPTURE(seed);
    CHECK_FALSE(lam.fallback);
    CHECK(std::abs(lam.value - es.eigenvalues().maxCoeff()) < 1e-8);
    const auto s = scaled_laplacian(l, lam.value);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ss(s);
    CHECK(ss.eigenvalues().maxCoeff() == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(ss.eigenvalues().minCoeff() >= -1.0 - 1e-12);
  }
}

TEST_CASE("power iteration on a nearly edgeless graph") {
  // weights like those of a Gaussian kernel over widely spread sensors
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(5, 5);
  a(0, 1) = a(1, 0) = 2e-13;
  a(1, 4) = a(4, 1) = 1.2e-8;
  a(2, 4) = a(4, 2) = 5e-12;
  a(3, 4) = a(4, 3) = 4.5e-12;
  const auto l = normalized_laplacian(a).matrix;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l);
  const auto lam = power_iteration_lambda_max(l);
  REQUIRE_FALSE(lam.fallback);
  CHECK(std::abs(lam.value / es.eigenvalues().maxCoeff() - 1.0) < 1e-6);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ss(scaled_laplacian(l, lam.value));
  CHECK(ss.eigenvalues().cwiseAbs().maxCoeff() < 1.0 + 1e-6);
}

TEST_CASE("Chebyshev recursion is cos(k arccos x)") {
  const std::size_t order = 8;
  for (double x = -1.0; x <= 1.0; x += 0.05) {
    Tensor theta({order + 1, 1, order + 1});
    for (std::size_t k = 0; k <= order; ++k) theta.data[k * (order + 1) + k] = 1.0;
    const auto h = cheb_conv(cst(Eigen::MatrixXd::Ones(1, 1)), one(Eigen::MatrixXd::Constant(1, 1, x)), constant(theta));
    for (std::size_t k = 0; k <= order; ++k) {
      CHECK(std::abs(h.value().data[k] - std::cos(static_cast<double>(k) * std::acos(x))) < 1e-12);
    }
  }
}

TEST_CASE("cheb_conv against explicit polynomials") {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd lt = scaled_of(random_adjacency(6, rng));
  const Eigen::MatrixXd x = random_matrix(6, 4, rng);
  const auto theta = random_tensor({4, 4, 3}, rng);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(6, 6);
  const Eigen::MatrixXd l2 = lt * lt, l3 = l2 * lt;
  const std::vector<Eigen::MatrixXd> t{id, lt, 2 * l2 - id, 4 * l3 - 3 * lt};
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(6, 3);
  for (std::size_t k = 0; k < 4; ++k) {
    Eigen::MatrixXd th(4, 3);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 3; ++j) th(i, j) = theta.data[(k * 4 + static_cast<std::size_t>(i)) * 3 + static_cast<std::size_t>(j)];
    }
    expected += t[k] * x * th;
  }
  const auto h = value(cheb_conv(cst(x), one(lt), constant(theta)));
  CHECK((h - expected).cwiseAbs().maxCoeff() < 1e-9);

  Tensor theta0({1, 4, 3});
  std::copy(theta.data.begin(), theta.data.begin() + 12, theta0.data.begin());
  Eigen::MatrixXd th0(4, 3);
  for (int i = 0; i < 12; ++i) th0(i / 3, i % 3) = theta0.data[static_cast<std::size_t>(i)];
  CHECK((value(cheb_conv(cst(x), one(lt), constant(theta0))) - x * th0).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(cheb_conv(cst(x), one(lt), constant(Tensor({0, 4, 3}))), ConfigError);
}

TEST_CASE("GATv2 against the loop oracle") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    const auto a = random_adjacency(5, rng);
    const auto x = random_matrix(5, 4, rng);
    const auto ws = random_matrix(4, 6, rng), wd = random_matrix(4, 6, rng), att = random_matrix(2, 3, rng);
    Eigen::MatrixXd alpha_sum;
    const auto expected = gatv2_oracle(x, a, ws, wd, att, 2, 0.2, &alpha_sum);
    Eigen::MatrixXd alpha;
    const auto g = attention_graph(a);
    const auto h = value(gatv2_conv(cst(x), g, cst(ws), cst(wd), cst(att), 2, true, 0.2, &alpha));
    CHECK((h - expected).cwiseAbs().maxCoeff() < 1e-9);
    const auto off = *g.offsets;
    for (std::size_t i = 0; i < 5; ++i) {
      for (int hh = 0; hh < 2; ++hh) {
        double total = 0;
        for (std::size_t e = off[i]; e < off[i + 1]; ++e) total += alpha(static_cast<Eigen::Index>(e), hh);
        CHECK(std::abs(total - 1.0) < 1e-9);
      }
    }
    const auto mean = value(gatv2_conv(cst(x), g, cst(ws), cst(wd), cst(att), 2, false));
    CHECK((mean - 0.5 * (expected.leftCols(3) + expected.rightCols(3))).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("attention special cases") {
  std::mt19937_64 rng(1);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
  Eigen::MatrixXd alpha;
  const auto x = random_matrix(3, 2, rng);
  gatv2_conv(cst(x), attention_graph(a), cst(random_matrix(2, 4, rng)), cst(random_matrix(2, 4, rng)),
             cst(random_matrix(1, 4, rng)), 1, true, 0.2, &alpha);
  CHECK(alpha.isOnes(0.0));

  // node 0 sees nodes 1 and 2, which carry identical features
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(3, 3);
  b(0, 1) = b(0, 2) = b(1, 1) = b(2, 2) = 1.0;
  Eigen::MatrixXd y = random_matrix(3, 2, rng);
  y.row(2) = y.row(1);
  gatv2_conv(cst(y), attention_graph(b), cst(random_matrix(2, 4, rng)), cst(random_matrix(2, 4, rng)),
             cst(random_matrix(1, 4, rng)), 1, true, 0.2, &alpha);
  CHECK(alpha(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(alpha(1, 0) == doctest::Approx(0.5).epsilon(1e-15));

  // zero query projection: uniform over the neighborhood
  const auto full = random_adjacency(4, rng, 1.0);
  const auto xt = random_matrix(4, 3, rng);
  transformer_conv(cst(xt), attention_graph(full), cst(random_matrix(3, 4, rng)), cst(random_matrix(3, 4, rng)),
                   cst(Eigen::MatrixXd::Zero(3, 4)), cst(random_matrix(3, 4, rng)), 2, true, &alpha);
  CHECK((alpha.array() - 0.25).abs().maxCoeff() < 1e-15);

  Eigen::MatrixXd empty = Eigen::MatrixXd::Identity(3, 3);
  empty(1, 1) = 0.0;
  CHECK_THROWS_AS(attention_graph(empty), ConfigError);
}

TEST_CASE("transformer_conv against the loop oracle") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    const auto a = random_adjacency(5, rng);
    const auto x = random_matrix(5, 4, rng);
    const auto w1 = random_matrix(4, 6, rng), w2 = random_matrix(4, 6, rng), w3 = random_matrix(4, 6, rng),
               w4 = random_matrix(4, 6, rng);
    const auto g = attention_graph(a);
    Eigen::MatrixXd alpha;
    const auto h = value(transformer_conv(cst(x), g, cst(w1), cst(w2), cst(w3), cst(w4), 2, true, &alpha));
    CHECK((h - transformer_oracle(x, a, w1, w2, w3, w4, 2)).cwiseAbs().maxCoeff() < 1e-9);
    const auto off = *g.offsets;
    for (std::size_t i = 0; i < 5; ++i) {
      for (int hh = 0; hh < 2; ++hh) {
        double total = 0;
        for (std::size_t e = off[i]; e < off[i + 1]; ++e) total += alpha(static_cast<Eigen::Index>(e), hh);
        CHECK(std::abs(total - 1.0) < 1e-9);
      }
    }
  }
}

TEST_CASE("permutation equivariance") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    const auto a = random_adjacency(7, rng);
    const auto x = random_matrix(7, 3, rng);
    const auto p = permutation(7, rng);
    const Eigen::MatrixXd pa = p * a * p.transpose(), px = p * x;

    const auto theta = constant(random_tensor({4, 3, 2}, rng));
    const auto c1 = value(cheb_conv(cst(x), one(scaled_of(a)), theta));
    const auto c2 = value(cheb_conv(cst(px), one(scaled_of(pa)), theta));
    CHECK((p * c1 - c2).cwiseAbs().maxCoeff() < 1e-9);

    const auto ws = cst(random_matrix(3, 4, rng)), wd = cst(random_matrix(3, 4, rng)), att = cst(random_matrix(2, 2, rng));
    const auto g1 = value(gatv2_conv(cst(x), attention_graph(a), ws, wd, att, 2, true));
    const auto g2 = value(gatv2_conv(cst(px), attention_graph(pa), ws, wd, att, 2, true));
    CHECK((p * g1 - g2).cwiseAbs().maxCoeff() < 1e-9);

    const auto w1 = cst(random_matrix(3, 4, rng)), w2 = cst(random_matrix(3, 4, rng)), w3 = cst(random_matrix(3, 4, rng)),
               w4 = cst(random_matrix(3, 4, rng));
    const auto t1 = value(transformer_conv(cst(x), attention_graph(a), w1, w2, w3, w4, 2, true));
    const auto t2 = value(transformer_conv(cst(px), attention_graph(pa), w1, w2, w3, w4, 2, true));
    CHECK((p * t1 - t2).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("batched layers equal per-sample layers") {
  std::mt19937_64 rng(21);
  std::vector<GraphSample> samples(3);
  for (auto& s : samples) {
    s.x = random_matrix(5, 4, rng, 0.3);
    s.adjacency = build_adjacency(s.x).weights;
    s.y = Eigen::VectorXd::Zero(1);
  }
  const auto batch = block_diag_batch(samples);
  const auto theta = constant(random_tensor({3, 4, 2}, rng));
  auto laps = std::make_shared<std::vector<Eigen::MatrixXd>>();
  for (const auto& s : samples) laps->push_back(scaled_of(s.adjacency));
  const auto ws = cst(random_matrix(4, 6, rng)), wd = cst(random_matrix(4, 6, rng)), att = cst(random_matrix(2, 3, rng));
  // head-averaged output, so the root weight maps to a single head width
  const auto w1 = cst(random_matrix(4, 3, rng)), w2 = cst(random_matrix(4, 6, rng)), w3 = cst(random_matrix(4, 6, rng)),
             w4 = cst(random_matrix(4, 6, rng));
  const auto bx = cst(batch.x);
  const auto cb = value(cheb_conv(bx, laps, theta));
  const auto gb = value(gatv2_conv(bx, attention_graph(batch), ws, wd, att, 2, true));
  const auto tb = value(transformer_conv(bx, attention_graph(batch), w1, w2, w3, w4, 2, false));
  for (int s = 0; s < 3; ++s) {
    const auto& smp = samples[static_cast<std::size_t>(s)];
    const auto xs = cst(smp.x);
    CHECK((cb.middleRows(5 * s, 5) - value(cheb_conv(xs, one((*laps)[static_cast<std::size_t>(s)]), theta))).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((gb.middleRows(5 * s, 5) - value(gatv2_conv(xs, attention_graph(smp.adjacency), ws, wd, att, 2, true))).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((tb.middleRows(5 * s, 5) - value(transformer_conv(xs, attention_graph(smp.adjacency), w1, w2, w3, w4, 2, false))).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("FGO identity, circulant and linearity") {
  std::mt19937_64 rng(4);
  const std::size_t n = 12;
  const auto x = random_matrix(n, 3, rng);

  Tensor re, im;
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(n);
  delta(0) = 1.0;
  circulant_operator(delta, Eigen::MatrixXd::Identity(3, 3), re, im);
  CHECK((value(fgo(cst(x), constant(re), constant(im), 1)) - x).cwiseAbs().maxCoeff() < 1e-12);

  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 r(static_cast<std::uint64_t>(seed));
    const Eigen::VectorXd c = random_matrix(static_cast<Eigen::Index>(n), 1, r);
    const auto w = random_matrix(3, 2, r);
    Eigen::MatrixXd a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c(static_cast<Eigen::Index>((i + n - j) % n));
    }
    circulant_operator(c, w, re, im);
    for (auto backend : {DftBackend::fftw, DftBackend::dense}) {
      const auto y = value(fgo(cst(x), constant(re), constant(im), 1, backend));
      CHECK((y - a * x * w).cwiseAbs().maxCoeff() < 1e-6);
    }
    CHECK((fgo_reference(x, split_operator(re, im)) - a * x * w).cwiseAbs().maxCoeff() < 1e-6);
  }

  const auto sre = constant(random_tensor({n, 3, 2}, rng)), sim = constant(random_tensor({n, 3, 2}, rng));
  const auto x2 = random_matrix(n, 3, rng);
  const auto lhs = value(fgo(cst(2.5 * x - 0.7 * x2), sre, sim, 1));
  const auto rhs = 2.5 * value(fgo(cst(x), sre, sim, 1)) - 0.7 * value(fgo(cst(x2), sre, sim, 1));
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("FGO backends, batching and the residue guard") {
  std::mt19937_64 rng(9);
  const std::size_t n = 10, samples = 3;
  const auto x = random_matrix(static_cast<Eigen::Index>(n * samples), 2, rng);
  const auto sre = constant(random_tensor({n, 2, 4}, rng)), sim = constant(random_tensor({n, 2, 4}, rng));
  const auto fast = value(fgo(cst(x), sre, sim, samples, DftBackend::fftw));
  const auto dense = value(fgo(cst(x), sre, sim, samples, DftBackend::dense));
  CHECK((fast - dense).cwiseAbs().maxCoeff() < 1e-10);
  for (std::size_t s = 0; s < samples; ++s) {
    const auto single = value(fgo(cst(x.middleRows(static_cast<Eigen::Index>(s * n), n)), sre, sim, 1));
    CHECK((fast.middleRows(static_cast<Eigen::Index>(s * n), n) - single).cwiseAbs().maxCoeff() < 1e-9);
  }
  // Hermitian part used by fgo agrees with the explicit-matrix path
  const auto herm = hermitian_operator(sre.value(), sim.value());
  CHECK((fgo_reference(x.topRows(n), herm) - fast.topRows(n)).cwiseAbs().maxCoeff() < 1e-10);
  // a raw, non-Hermitian operator leaves an imaginary part behind
  CHECK_THROWS_AS(fgo_reference(x.topRows(n), split_operator(sre.value(), sim.value())), NumericalError);
  CHECK_THROWS_AS(fgo(cst(x), sre, sim, 2), ShapeError);

  std::vector<cd> in(n * 2), out(n * 2), back(n * 2);
  for (auto& v : in) v = cd(std::normal_distribution<double>()(rng), 0.0);
  dft_columns(in.data(), out.data(), n, 2, -1, DftBackend::fftw);
  dft_columns(out.data(), back.data(), n, 2, +1, DftBackend::dense);
  for (std::size_t i = 0; i < in.size(); ++i) CHECK(std::abs(back[i] / static_cast<double>(n) - in[i]) < 1e-12);
}

TEST_CASE("layer gradients against finite differences") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    CAPTURE(seed);
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    const std::uint64_t ps = 500 + static_cast<std::uint64_t>(seed);
    const auto a = random_adjacency(5, rng);
    auto x = prm(random_matrix(5, 3, rng));

    auto theta = parameter(random_tensor({3, 3, 2}, rng));
    const auto lap = one(scaled_of(a));
    CHECK(gradient_check({x, theta}, [&] { return projection(cheb_conv(x, lap, theta), ps); }) < kLayerTol);

    const auto g = attention_graph(a);
    auto ws = prm(random_matrix(3, 4, rng)), wd = prm(random_matrix(3, 4, rng)), att = prm(random_matrix(2, 2, rng));
    CHECK(gradient_check({x, ws, wd, att}, [&] { return projection(gatv2_conv(x, g, ws, wd, att, 2, true), ps); }) < kLayerTol);
    CHECK(gradient_check({x, ws, wd, att}, [&] { return projection(gatv2_conv(x, g, ws, wd, att, 2, false), ps); }) < kLayerTol);

    auto w1 = prm(random_matrix(3, 4, rng)), w2 = prm(random_matrix(3, 4, rng)), w3 = prm(random_matrix(3, 4, rng)),
         w4 = prm(random_matrix(3, 4, rng));
    CHECK(gradient_check({x, w1, w2, w3, w4},
                         [&] { return projection(transformer_conv(x, g, w1, w2, w3, w4, 2, true), ps); }) < kLayerTol);

    auto hx = prm(random_matrix(12, 2, rng));
    auto sre = parameter(random_tensor({6, 2, 3}, rng)), sim = parameter(random_tensor({6, 2, 3}, rng));
    for (auto backend : {DftBackend::fftw, DftBackend::dense}) {
      CHECK(gradient_check({hx, sre, sim}, [&] { return projection(fgo(hx, sre, sim, 2, backend), ps); }) < kLayerTol);
    }
  }
}

}
