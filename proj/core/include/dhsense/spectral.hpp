#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "dhsense/tensor.hpp"

namespace dhsense {

using ComplexRowMatrix = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class DftBackend { fftw, dense };

/// Unnormalized DFT of every column of an n x cols row-major block:
/// out_k = sum_t exp(sign * 2 pi i k t / n) in_t, sign = -1 forward, +1 inverse.
void dft_columns(const std::complex<double>* in, std::complex<double>* out, std::size_t n, std::size_t cols, int sign,
                 DftBackend backend = DftBackend::fftw);

/// Explicit n x n transform matrix, entries exp(sign * 2 pi i k t / n).
ComplexRowMatrix dft_matrix(std::size_t n, int sign);

/// S_k = (P_k + conj(P_{-k})) / 2 for a raw operator given as (re, im), each
/// shaped n x d_in x d_out. The result is Hermitian in k, so the inverse
/// transform of any real input is real.
std::vector<ComplexRowMatrix> hermitian_operator(const Tensor& re, const Tensor& im);

/// Fourier graph operator on the hypervariate graph of each sample:
///   Y_b = Re IDFT( DFT(X_b) (.) S ),  (.) = per-frequency d_in x d_out product,
/// with S the Hermitian part of (s_re, s_im). `x` stacks `samples` blocks of n
/// rows. Throws NumericalError if the discarded imaginary part reaches 1e-6.
Var fgo(const Var& x, const Var& s_re, const Var& s_im, std::size_t samples,
        DftBackend backend = DftBackend::fftw);

/// Same map with explicit transform matrices and a caller-supplied S (no
/// symmetrization), for a single n x d_in sample.
Eigen::MatrixXd fgo_reference(const Eigen::MatrixXd& x, const std::vector<ComplexRowMatrix>& s);

}  // namespace dhsense
