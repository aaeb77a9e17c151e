#include "asgnet/params.hpp"

#include <algorithm>
#include <cmath>

namespace asg {

double ParamInit::uniform(double lo, double hi) {
  const double unit = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * unit;
}

ConvLayer ParamInit::conv(std::string name, const ConvSpec& spec) {
  spec.validate();
  ConvLayer layer{spec, {std::move(name), Tensor(spec.kernel_dims()), Tensor({spec.out_channels})}};
  const int fan_in = (spec.depthwise ? 1 : spec.in_channels) * spec.kernel * spec.kernel;
  const double bound = std::sqrt(6.0 / fan_in);
  for (float& v : layer.params.kernel.data()) v = static_cast<float>(uniform(-bound, bound));
  return layer;
}

int msa_hidden(int channels) noexcept { return std::max(1, channels / 4); }

MsaParams ParamInit::msa(const std::string& name, int channels) {
  const int hidden = msa_hidden(channels);
  return {conv(name + ".small_reduce", {channels, hidden, 3, 1, 1, false}),
          conv(name + ".small_gate", {hidden, 1, 3, 1, 1, false}),
          conv(name + ".large_reduce", {channels, hidden, 5, 1, 1, false}),
          conv(name + ".large_gate", {hidden, 1, 5, 1, 1, false})};
}

AsfParams ParamInit::asf(const std::string& name, int in_channels, int width) {
  AsfParams p;
  p.ln = norm(name + ".ln", in_channels);
  p.proj = pointwise(name + ".proj", in_channels, width);
  p.channel_gate = pointwise(name + ".channel_gate", width, width);
  p.msa = msa(name + ".msa", width);
  p.bn = norm(name + ".bn", width);
  return p;
}

}  // namespace asg
