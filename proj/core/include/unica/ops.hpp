#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "unica/tape.hpp"
#include "unica/tensor.hpp"

namespace unica {

// Plain tensor kernels. Reductions always run left to right so results are
// bitwise reproducible.
namespace kernels {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax(const Tensor& v);  // row-wise for matrices
Tensor layer_norm(const Tensor& v, const Tensor& gamma, const Tensor& beta, double eps = 1e-6);
double elu(double x);
double sigmoid(double x);
double silu(double x);

}  // namespace kernels

inline constexpr double kLayerNormEps = 1e-6;
inline constexpr double kSigmaFloor = 1e-6;

// Differentiable primitives recorded on the inputs' tape. Matrices are
// [rows, cols]; a rank-1 tensor of n elements is accepted wherever a single
// row is expected.
namespace ops {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
// x [n, m] + b broadcast over rows (b holds m values).
Var add_bias(Var x, Var b);
Var matmul(Var a, Var b);
// a [m, k] * b^T where b is [n, k].
Var matmul_nt(Var a, Var b);
// x [n, in] * W [in, out] + b [out]
Var linear(Var x, Var w, Var b);
Var linear(Var x, Var w);
Var transpose(Var a);

Var elu(Var x);
Var sigmoid(Var x);
Var silu(Var x);

Var softmax_rows(Var x);
Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = kLayerNormEps);

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(Var x, std::size_t begin, std::size_t count);
Var slice_cols(Var x, std::size_t begin, std::size_t count);
Var reshape(Var x, Shape shape);

Var sum(Var x);
Var mean(Var x);
// [n, m] -> [1, m]
Var mean_rows(Var x);

// Row lookup into an embedding table [vocab, dim].
Var gather_rows(Var table, std::span<const std::size_t> ids);

// Per-column standardisation using the mean and population std of the first
// `prefix_rows` rows; the std is floored at `floor` (no gradient through the
// floor branch).
Var standardize_columns(Var x, std::size_t prefix_rows, double floor = kSigmaFloor);

// Cuts every column of x [n, C] into ceil(n / patch) patches, left-padding
// with zeros. Output row (token * C + channel) holds the patch values
// followed by the patch mask. `mask` is empty (all observed) or [n, C].
Var patchify(Var x, const Tensor& mask, std::size_t patch);

// out[p] = sum_m w[p, m] * v[p * M + m]; w [P, M], v [P * M, d].
Var pool_channels(Var w, Var v);

// Mean pinball loss over an [H, K] quantile matrix against H targets.
Var quantile_loss(Var pred, std::span<const double> y, std::span<const double> levels);
// Mean Huber loss of an H-vector (any shape with H elements).
Var huber_loss(Var pred, std::span<const double> y, double delta = 1.0);

}  // namespace ops
}  // namespace unica
