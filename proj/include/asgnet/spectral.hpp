#pragma once

#include "asgnet/ops.hpp"
#include "asgnet/tensor.hpp"

namespace asg {

/// Per-channel 2-D spectra: real and imaginary planes of identical shape.
/// Element (n, c, v, u) holds frequency u along W and v along H; there is
/// no fftshift anywhere.
struct ComplexTensor {
  Tensor re;
  Tensor im;

  ComplexTensor() = default;
  ComplexTensor(Tensor re_part, Tensor im_part);
  explicit ComplexTensor(const Tensor& real_only);

  const std::vector<int>& dims() const noexcept { return re.dims(); }
};

enum class FftMethod {
  kDirect,  ///< separable DFT, any size
  kRadix2,  ///< iterative Cooley-Tukey, H and W must be powers of two
};

bool is_power_of_two(int v) noexcept;

/// Unnormalized forward transform of every (n, c) plane.
ComplexTensor fft2d(const Tensor& x, FftMethod method = FftMethod::kDirect);
ComplexTensor fft2d(const ComplexTensor& x, FftMethod method = FftMethod::kDirect);
/// Inverse transform with the 1 / (W H) factor.
ComplexTensor ifft2d(const ComplexTensor& spectrum, FftMethod method = FftMethod::kDirect);
/// Elementwise sqrt(re^2 + im^2).
Tensor modulus(const ComplexTensor& z);

/// Two spatial gates sharing one input: kernel-3 and kernel-5 conv pairs.
/// Each pair maps C -> hidden -> 1 with ReLU between and sigmoid after.
struct MsaParams {
  ConvLayer small_reduce;
  ConvLayer small_gate;
  ConvLayer large_reduce;
  ConvLayer large_gate;
};

/// Sum of the two sigmoid gate maps, shape (N, 1, H, W), values in [0, 2].
Tensor msa_gate(const Tensor& x, const MsaParams& p);
/// Multi-scale spatial attention on a real feature: g3 * x + g5 * x.
Tensor msa(const Tensor& x, const MsaParams& p);

/// Parameters of one adaptive spectrum filter.
struct AsfParams {
  NormParams ln;          // over the input channels
  ConvLayer proj;         // 1x1, input channels -> width
  ConvLayer channel_gate; // 1x1 on pooled magnitudes, width -> width
  MsaParams msa;
  NormParams bn;          // output BatchNorm, width channels
};

/// Test hooks for the filter. Production code leaves both off.
struct AsfHooks {
  /// Forces the attention weights to 1 so the joint attention returns 2X.
  bool bypass_attention = false;
  /// Skips the layer norm and the batch norm (ReLU still applies).
  bool bypass_norms = false;
};

/// Real, non-negative weight field w such that joint_attention(X) = w X + X.
/// Gates are computed from |X|: w = ca_c * (g3 + g5)(|X| * ca).
Tensor joint_attention_weights(const ComplexTensor& spectrum, const AsfParams& p);
ComplexTensor joint_attention(const ComplexTensor& spectrum, const AsfParams& p,
                              bool bypass = false);

/// BN -> ReLU of |ifft(JA(fft(proj(LN(x)))))|.
Tensor asf(const Tensor& x, const AsfParams& p, const AsfHooks& hooks = {},
           FftMethod method = FftMethod::kDirect);

}  // namespace asg
