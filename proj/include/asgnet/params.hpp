#pragma once

#include <concepts>
#include <cstdint>
#include <random>
#include <string>
#include <type_traits>

#include "asgnet/ops.hpp"
#include "asgnet/spectral.hpp"

namespace asg {

/// Seeded parameter factory: Kaiming-uniform kernels, zero biases, unit
/// norm scales. Draws come from std::mt19937_64 converted to doubles by bit
/// arithmetic, so the stream is identical on every standard library.
class ParamInit {
 public:
  explicit ParamInit(std::uint64_t seed) : rng_(seed) {}

  ConvLayer conv(std::string name, const ConvSpec& spec);
  ConvLayer pointwise(std::string name, int in, int out) {
    return conv(std::move(name), ConvSpec::pointwise(in, out));
  }
  ConvLayer depthwise(std::string name, int channels, int kernel) {
    return conv(std::move(name), ConvSpec::depthwise_conv(channels, kernel));
  }
  NormParams norm(std::string name, int channels) {
    return NormParams::identity(std::move(name), channels);
  }
  MsaParams msa(const std::string& name, int channels);
  AsfParams asf(const std::string& name, int in_channels, int width);

  /// Uniform draw in [lo, hi).
  double uniform(double lo, double hi);

 private:
  std::mt19937_64 rng_;
};

/// Hidden width of the spatial-attention convs for a given input width.
int msa_hidden(int channels) noexcept;

template <class T, class U>
concept Like = std::same_as<std::remove_const_t<T>, U>;

// visit_params(layer, f) calls f(name, tensor) for every learnable tensor, in
// a fixed order. Works on const and non-const objects alike.

template <Like<ConvLayer> L, class F>
void visit_params(L& layer, F&& f) {
  f(layer.params.name + ".weight", layer.params.kernel);
  f(layer.params.name + ".bias", layer.params.bias);
}

template <Like<NormParams> N, class F>
void visit_params(N& norm, F&& f) {
  f(norm.name + ".scale", norm.scale);
  f(norm.name + ".shift", norm.shift);
}

template <Like<MsaParams> M, class F>
void visit_params(M& m, F&& f) {
  visit_params(m.small_reduce, f);
  visit_params(m.small_gate, f);
  visit_params(m.large_reduce, f);
  visit_params(m.large_gate, f);
}

template <Like<AsfParams> A, class F>
void visit_params(A& a, F&& f) {
  visit_params(a.ln, f);
  visit_params(a.proj, f);
  visit_params(a.channel_gate, f);
  visit_params(a.msa, f);
  visit_params(a.bn, f);
}

}  // namespace asg
