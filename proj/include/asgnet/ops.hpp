#pragma once

#include <string>
#include <utility>
#include <vector>

#include "asgnet/tensor.hpp"

namespace asg {

/// Geometry of one 2-D convolution.
///
/// Padding is always dilation * (kernel - 1) / 2, which keeps H and W
/// unchanged at stride 1 and gives ceil(H / stride) otherwise.
struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 1;
  int dilation = 1;
  int stride = 1;
  bool depthwise = false;

  int padding() const noexcept { return dilation * (kernel - 1) / 2; }
  /// Kernel tensor extents: (O, I, k, k), or (C, 1, k, k) when depthwise.
  std::vector<int> kernel_dims() const;
  void validate() const;

  static ConvSpec pointwise(int in, int out) { return {in, out, 1, 1, 1, false}; }
  static ConvSpec depthwise_conv(int channels, int kernel) {
    return {channels, channels, kernel, 1, 1, true};
  }
};

/// Learnable tensors of one convolution.
struct LayerParams {
  std::string name;
  Tensor kernel;
  Tensor bias;
};

/// Affine parameters of a normalization layer, one entry per channel.
struct NormParams {
  std::string name;
  Tensor scale;
  Tensor shift;

  static NormParams identity(std::string name, int channels);
};

/// A convolution together with its weights.
struct ConvLayer {
  ConvSpec spec;
  LayerParams params;

  Tensor operator()(const Tensor& x) const;

  /// The same layer restricted to a subset of its input channels, given as
  /// [begin, end) ranges. Used where an ablation drops a block from a concat.
  ConvLayer select_inputs(const std::vector<std::pair<int, int>>& ranges) const;
};

enum class PoolMode { kAvg, kMax };
enum class Activation { kRelu, kGelu, kSigmoid };

Tensor conv2d(const Tensor& x, const ConvSpec& spec, const LayerParams& p);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose2d(const Tensor& a);
Tensor softmax_rows(const Tensor& x);
Tensor global_pool(const Tensor& x, PoolMode mode);

/// Normalizes across channels independently at every (n, y, x), eps = 1e-5.
Tensor layer_norm(const Tensor& x, const NormParams& p);
/// Batch statistics over (N, H, W) per channel, affine, then ReLU.
Tensor batch_norm_act(const Tensor& x, const NormParams& p);

float activate(float v, Activation kind);
Tensor activate(const Tensor& x, Activation kind);

/// Half-pixel-centre bilinear interpolation (align_corners = false).
Tensor resize_bilinear(const Tensor& x, int out_h, int out_w);

Tensor concat_channels(const TensorRefs& xs);
Tensor slice_channels(const Tensor& x, int begin, int count);

// Elementwise helpers. add/multiply require identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor multiply(const Tensor& a, const Tensor& b);
/// x * gate where gate is (N, C, 1, 1).
Tensor scale_channels(const Tensor& x, const Tensor& gate);
/// x * gate where gate is (N, 1, H, W).
Tensor scale_spatial(const Tensor& x, const Tensor& gate);
/// Repeats an (N, C, 1, 1) tensor over an h x w grid.
Tensor broadcast_spatial(const Tensor& x, int h, int w);
/// Repeats an (N, 1, H, W) tensor over `channels` channels.
Tensor broadcast_channels(const Tensor& x, int channels);

inline constexpr double kNormEps = 1e-5;

}  // namespace asg
