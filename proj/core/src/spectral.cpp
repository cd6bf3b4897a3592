#include "dhsense/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include "dhsense/error.hpp"

namespace dhsense {

using cd = std::complex<double>;
using CBuffer = std::vector<cd, Eigen::aligned_allocator<cd>>;

namespace {

constexpr double residue_limit = 1e-6;

// FFTW's planner is not thread-safe; execution of an existing plan on new
// arrays is.
std::mutex g_plan_mutex;

fftw_plan plan_for(std::size_t n, std::size_t cols, int sign) {
  static std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> plans;
  std::lock_guard lock(g_plan_mutex);
  auto key = std::make_tuple(n, cols, sign);
  if (auto it = plans.find(key); it != plans.end()) return it->second;
  CBuffer a(n * cols), b(n * cols);
  int len = static_cast<int>(n);
  auto* in = reinterpret_cast<fftw_complex*>(a.data());
  auto* out = reinterpret_cast<fftw_complex*>(b.data());
  const int stride = static_cast<int>(cols);
  fftw_plan p = fftw_plan_many_dft(1, &len, stride, in, nullptr, stride, 1, out, nullptr, stride, 1,
                                   sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!p) throw NumericalError("FFTW could not plan a transform of length " + std::to_string(n));
  plans.emplace(key, p);
  return p;
}

const ComplexRowMatrix& cached_matrix(std::size_t n, int sign) {
  static std::map<std::pair<std::size_t, int>, ComplexRowMatrix> cache;
  std::lock_guard lock(g_plan_mutex);
  auto key = std::make_pair(n, sign);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, dft_matrix(n, sign)).first;
  return it->second;
}

using CMap = Eigen::Map<ComplexRowMatrix>;
using CConstMap = Eigen::Map<const ComplexRowMatrix>;

fftw_plan r2c_plan(std::size_t n, std::size_t cols) {
  static std::map<std::pair<std::size_t, std::size_t>, fftw_plan> plans;
  std::lock_guard lock(g_plan_mutex);
  auto key = std::make_pair(n, cols);
  if (auto it = plans.find(key); it != plans.end()) return it->second;
  std::vector<double> a(n * cols);
  CBuffer b((n / 2 + 1) * cols);
  int len = static_cast<int>(n);
  const int stride = static_cast<int>(cols);
  fftw_plan p = fftw_plan_many_dft_r2c(1, &len, stride, a.data(), nullptr, stride, 1,
                                       reinterpret_cast<fftw_complex*>(b.data()), nullptr, stride, 1,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!p) throw NumericalError("FFTW could not plan a real transform of length " + std::to_string(n));
  plans.emplace(key, p);
  return p;
}

// Forward transform of real sample-major data (b, t, c) into the
// frequency-major layout (k, b, c), so each frequency becomes one
// (samples x d_in) x (d_in x d_out) product. The upper half of the spectrum
// is filled by conjugate symmetry.
void forward_real(const double* in, cd* out, std::size_t n, std::size_t samples, std::size_t cols,
                  DftBackend backend) {
  CBuffer spec(n * cols);
  CBuffer tmp;
  const std::size_t half = n / 2 + 1;
  for (std::size_t b = 0; b < samples; ++b) {
    const double* xb = in + b * n * cols;
    if (backend == DftBackend::fftw) {
      fftw_execute_dft_r2c(r2c_plan(n, cols), const_cast<double*>(xb), reinterpret_cast<fftw_complex*>(spec.data()));
      for (std::size_t k = half; k < n; ++k) {
        for (std::size_t c = 0; c < cols; ++c) spec[k * cols + c] = std::conj(spec[(n - k) * cols + c]);
      }
    } else {
      tmp.assign(xb, xb + n * cols);
      dft_columns(tmp.data(), spec.data(), n, cols, -1, backend);
    }
    for (std::size_t k = 0; k < n; ++k) {
      std::copy_n(spec.data() + k * cols, cols, out + (k * samples + b) * cols);
    }
  }
}

// Inverse transform from frequency-major (k, b, c) back to sample-major, unnormalized.
void inverse_to_samples(const cd* in, cd* out, std::size_t n, std::size_t samples, std::size_t cols,
                        DftBackend backend) {
  CBuffer block(n * cols);
  for (std::size_t b = 0; b < samples; ++b) {
    for (std::size_t k = 0; k < n; ++k) {
      std::copy_n(in + (k * samples + b) * cols, cols, block.data() + k * cols);
    }
    dft_columns(block.data(), out + b * n * cols, n, cols, +1, backend);
  }
}

}  // namespace

ComplexRowMatrix dft_matrix(std::size_t n, int sign) {
  ComplexRowMatrix f(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t t = 0; t < n; ++t) {
      // reduce k*t mod n first so large indices keep full angle precision
      const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      f(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) = cd(std::cos(angle), std::sin(angle));
    }
  }
  return f;
}

void dft_columns(const cd* in, cd* out, std::size_t n, std::size_t cols, int sign, DftBackend backend) {
  if (backend == DftBackend::fftw) {
    fftw_execute_dft(plan_for(n, cols, sign), reinterpret_cast<fftw_complex*>(const_cast<cd*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
    return;
  }
  const auto& f = cached_matrix(n, sign);
  const auto r = static_cast<Eigen::Index>(n);
  const auto c = static_cast<Eigen::Index>(cols);
  ComplexRowMatrix tmp = f * CConstMap(in, r, c);
  CMap(out, r, c) = tmp;
}

std::vector<ComplexRowMatrix> hermitian_operator(const Tensor& re, const Tensor& im) {
  if (re.rank() != 3 || re.shape != im.shape) {
    throw ShapeError("frequency operator needs matching n x d_in x d_out parts, got " + shape_string(re.shape) +
                     " and " + shape_string(im.shape));
  }
  const std::size_t n = re.shape[0], din = re.shape[1], dout = re.shape[2];
  const std::size_t block = din * dout;
  std::vector<ComplexRowMatrix> s(n, ComplexRowMatrix(din, dout));
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t m = (n - k) % n;
    for (std::size_t e = 0; e < block; ++e) {
      const cd p(re.data[k * block + e], im.data[k * block + e]);
      const cd q(re.data[m * block + e], -im.data[m * block + e]);
      s[k].data()[e] = 0.5 * (p + q);
    }
  }
  return s;
}

Var fgo(const Var& x, const Var& s_re, const Var& s_im, std::size_t samples, DftBackend backend) {
  const auto& shape = s_re.shape();
  if (shape.size() != 3 || s_im.shape() != shape) {
    throw ShapeError("fgo: operator shapes " + shape_string(shape) + " and " + shape_string(s_im.shape()));
  }
  const std::size_t n = shape[0], din = shape[1], dout = shape[2];
  if (samples == 0 || x.rows() != samples * n || x.cols() != din) {
    throw ShapeError("fgo: input shape " + shape_string(x.shape()) + " does not match " + std::to_string(samples) +
                     " samples of operator " + shape_string(shape));
  }
  const auto S = hermitian_operator(s_re.value(), s_im.value());
  const auto bi = static_cast<Eigen::Index>(samples);
  const auto dini = static_cast<Eigen::Index>(din);
  const auto douti = static_cast<Eigen::Index>(dout);

  // xhat and z are frequency-major: row k * samples + b.
  auto xhat = std::make_shared<CBuffer>(n * samples * din);
  forward_real(x.value().data.data(), xhat->data(), n, samples, din, backend);
  CBuffer z(n * samples * dout), y(n * samples * dout);
  for (std::size_t k = 0; k < n; ++k) {
    CMap(z.data() + k * samples * dout, bi, douti).noalias() =
        CConstMap(xhat->data() + k * samples * din, bi, dini) * S[k];
  }
  inverse_to_samples(z.data(), y.data(), n, samples, dout, backend);

  Tensor out({samples * n, dout});
  const double inv_n = 1.0 / static_cast<double>(n);
  double residue = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    out.data[i] = y[i].real() * inv_n;
    residue = std::max(residue, std::abs(y[i].imag() * inv_n));
  }
  if (!(residue < residue_limit)) {
    throw NumericalError("fgo: imaginary residue " + std::to_string(residue) + " in the inverse transform");
  }

  return make_result(std::move(out), {x, s_re, s_im}, [samples, n, din, dout, backend, xhat](Node& nd) {
    const auto S = hermitian_operator(nd.parents[1]->value, nd.parents[2]->value);
    const auto bi = static_cast<Eigen::Index>(samples);
    const auto dini = static_cast<Eigen::Index>(din);
    const auto douti = static_cast<Eigen::Index>(dout);
    const bool need_x = nd.parents[0]->requires_grad;
    const bool need_s = nd.parents[1]->requires_grad || nd.parents[2]->requires_grad;

    const auto& g = nd.value.ensure_grad();
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> gs_in(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) gs_in[i] = g[i] * inv_n;
    CBuffer gz(n * samples * dout);
    forward_real(gs_in.data(), gz.data(), n, samples, dout, backend);

    CBuffer gxh, gx;
    if (need_x) gxh.resize(n * samples * din);
    std::vector<ComplexRowMatrix> gs;
    if (need_s) gs.assign(n, ComplexRowMatrix(dini, douti));
    for (std::size_t k = 0; k < n; ++k) {
      CConstMap gzk(gz.data() + k * samples * dout, bi, douti);
      if (need_x) CMap(gxh.data() + k * samples * din, bi, dini).noalias() = gzk * S[k].adjoint();
      if (need_s) gs[k].noalias() = CConstMap(xhat->data() + k * samples * din, bi, dini).adjoint() * gzk;
    }
    if (need_x) {
      gx.resize(gxh.size());
      inverse_to_samples(gxh.data(), gx.data(), n, samples, din, backend);
      auto& gxr = nd.parents[0]->value.ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gxr[i] += gx[i].real();
    }
    if (need_s) {
      const std::size_t block = din * dout;
      auto& gre = nd.parents[1]->value.ensure_grad();
      auto& gim = nd.parents[2]->value.ensure_grad();
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t m = (n - k) % n;
        for (std::size_t e = 0; e < block; ++e) {
          const cd gk = 0.5 * (gs[k].data()[e] + std::conj(gs[m].data()[e]));
          gre[k * block + e] += gk.real();
          gim[k * block + e] += gk.imag();
        }
      }
    }
  });
}

Eigen::MatrixXd fgo_reference(const Eigen::MatrixXd& x, const std::vector<ComplexRowMatrix>& s) {
  const std::size_t n = static_cast<std::size_t>(x.rows());
  if (s.size() != n) throw ShapeError("fgo_reference: operator has " + std::to_string(s.size()) + " frequencies");
  const ComplexRowMatrix f = dft_matrix(n, -1);
  const ComplexRowMatrix finv = dft_matrix(n, +1) / static_cast<double>(n);
  const ComplexRowMatrix xh = f * x.cast<cd>();
  ComplexRowMatrix z(x.rows(), s[0].cols());
  for (std::size_t k = 0; k < n; ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    z.row(ki) = xh.row(ki) * s[k];
  }
  const ComplexRowMatrix y = finv * z;
  const double residue = y.imag().cwiseAbs().maxCoeff();
  if (!(residue < residue_limit)) {
    throw NumericalError("fgo: imaginary residue " + std::to_string(residue) + " in the inverse transform");
  }
  return y.real();
}

}  // namespace dhsense
