#pragma once

#include <vector>

#include "swinhaze/nn/tensor.hpp"

// Differentiable operations on NHWC feature maps. Weight layouts:
//   linear          W [Cin, Cout], b [Cout]
//   conv2d          W [k * k * Cin, Cout] (rows ordered ky, kx, cin), b [Cout]
//   depthwise 3x3   W [9, C], b [C]
//   transpose conv  W [Cin, 9 * Cout] (columns ordered ky, kx, cout), b [Cout]
namespace swinhaze::nn {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, real s);
// x + alpha * branch
Tensor scaled_residual(const Tensor& x, const Tensor& branch, real alpha);
// d * A + e * (1 - A)
Tensor blend(const Tensor& d, const Tensor& e, const Tensor& weights);
// x [N,H,W,C] times s [N,1,1,C]
Tensor mul_channels(const Tensor& x, const Tensor& s);

Tensor relu(const Tensor& x);
// z * Phi(z) with the exact normal CDF.
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

Tensor concat_channels(const std::vector<Tensor>& parts);
// [N,H,W,C] -> [N,1,1,C]
Tensor global_avg_pool(const Tensor& x);
Tensor resize_bilinear(const Tensor& x, int out_height, int out_width);

// Border handling of spatial convolutions: zeros, or mirrored samples without
// edge duplication.
enum class Pad { Zero, Reflect };

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int kernel, int stride,
              int padding, Pad pad = Pad::Zero);
Tensor depthwise_conv3x3(const Tensor& x, const Tensor& weight, const Tensor& bias, Pad pad = Pad::Zero);
// 3x3, stride 2, padding 1, output padding 1: doubles H and W. The last output
// row and column only see one input tap; Pad::Reflect supplies the missing one
// from the edge sample (the mirror of the zero-inserted grid).
Tensor conv_transpose3x3_s2(const Tensor& x, const Tensor& weight, const Tensor& bias, Pad pad = Pad::Zero);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, real eps = 1e-5f);

// sum_i w_i x_i as a one-element tensor.
Tensor weighted_sum(const Tensor& x, const std::vector<real>& weights);

// Scaled dot-product attention inside window x window tiles of a cyclically
// shifted grid. `qkv` is [N,H,W,3C] with channels ordered q | k | v; head h uses
// channel slice [h*dk, (h+1)*dk) of each. Pairs that wrapped around the border
// are masked out when shift > 0. Returns [N,H,W,C] in the original layout.
Tensor window_attention_core(const Tensor& qkv, int heads, int window, int shift);

// Flat pixel index (y * W + x) of token t of window w, ordered [window][token],
// for the grid rolled by -shift along both axes.
std::vector<int> window_token_index(int height, int width, int window, int shift);

// [N,H,W,C] -> [N * windows, window, window, C] and back (no autograd).
Tensor partition_windows(const Tensor& x, int window, int shift);
Tensor merge_windows(const Tensor& windows, int height, int width, int window, int shift);

// Softmax rows produced by window_attention_core, ordered
// [n][window][head][query][key].
std::vector<real> window_attention_probs(const Tensor& qkv, int heads, int window, int shift);

}  // namespace swinhaze::nn
