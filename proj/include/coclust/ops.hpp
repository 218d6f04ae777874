#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "coclust/segments.hpp"
#include "coclust/tape.hpp"
#include "coclust/tensor.hpp"

namespace coclust::ops {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kProbabilityClamp = 1e-12;

// Plain evaluations, used directly and as the reference for the taped ops.

/// Max-subtracted exp-normalize. Throws NumericalError on non-finite input.
std::vector<double> softmax(std::span<const double> v);
/// gain * (v - mean) / sqrt(var + eps) + bias with population variance.
std::vector<double> layer_norm(std::span<const double> v, std::span<const double> gain,
                               std::span<const double> bias, double eps = kLayerNormEps);

// Taped primitives. Matrices are rank-2 tensors; "row" arguments are 1 x n.

Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double factor);
/// x (n x m) plus a 1 x m row added to every row.
Var add_bias(Tape& t, Var x, Var bias);
Var relu(Tape& t, Var x);
Var sigmoid(Tape& t, Var x);
Var softmax_rows(Tape& t, Var x);
Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps = kLayerNormEps);
Var concat_cols(Tape& t, std::span<const Var> parts);
Var gather_rows(Tape& t, Var x, std::span<const std::size_t> rows);
/// Per segment, the mean of the member rows of x; empty segments give zeros.
Var segment_mean(Tape& t, Var x, const Segments& segments);
/// n x heads matrix of scaled dot products between each key row slice and the
/// matching slice of the 1 x d query: sum_j k[u,j] q[j] / sqrt(d / heads).
Var head_scores(Tape& t, Var keys, Var query, std::size_t heads);
/// For each segment and head, softmax of the members' scores weighting the
/// members' value slices. Output is segments x d; empty segments give zeros.
/// When weights_out is given it receives the attention weights laid out as
/// [incidence position][head].
Var segment_attention(Tape& t, Var scores, Var values, const Segments& segments,
                      std::size_t heads, std::vector<double>* weights_out = nullptr);
/// Multiplies row r by mask[r].
Var mask_rows(Tape& t, Var x, std::span<const double> mask);
/// Inverted dropout. rate == 0 is the identity and draws nothing from rng.
Var dropout(Tape& t, Var x, double rate, std::mt19937_64& rng);
Var sum(Tape& t, Var x);
Var mean(Tape& t, Var x);
/// Mean binary cross-entropy over all entries. Probabilities are clamped to
/// [1e-12, 1 - 1e-12]; labels must be 0 or 1.
Var bce(Tape& t, Var probs, const Tensor& labels);

}  // namespace coclust::ops
