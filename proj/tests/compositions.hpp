#pragma once

// Hand-chained versions of the network blocks, built only from operations
// that are verified on their own, plus parameter helpers for exercising them.

#include <random>
#include <string>
#include <vector>

#include "asgnet/network.hpp"

namespace compose {

using namespace asg;

// Non-trivial biases and norm affines so compositions exercise every term.
inline void jitter(AsgNetParams& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> off(-0.2, 0.2);
  std::uniform_real_distribution<double> gain(0.7, 1.3);
  visit_params(net, [&](const std::string& name, Tensor& t) {
    if (name.ends_with(".bias") || name.ends_with(".shift")) {
      for (float& v : t.data()) v = static_cast<float>(off(rng));
    } else if (name.ends_with(".scale")) {
      for (float& v : t.data()) v = static_cast<float>(gain(rng));
    }
  });
}

inline AsgNetParams jittered(const EncoderConfig& config, std::uint64_t seed = 42) {
  AsgNetParams net = init_params(config, seed);
  jitter(net, seed + 1);
  return net;
}

inline Tensor manual_asf(const Tensor& x, const AsfParams& p, FftMethod method = FftMethod::kDirect) {
  const Tensor projected = p.proj(layer_norm(x, p.ln));
  const ComplexTensor filtered = joint_attention(fft2d(projected, method), p);
  return batch_norm_act(modulus(ifft2d(filtered, method)), p.bn);
}

inline Tensor manual_gcffn(const Tensor& x, const GcffnParams& p, bool with_asf) {
  const Tensor normed = layer_norm(x, p.ln);
  const Tensor projected = p.proj(normed);
  const Tensor a = p.dw_in(projected);
  const Tensor gated = multiply(activate(a, Activation::kGelu), a);
  const Tensor g1 = p.dw_out(gated);
  if (!with_asf) return add(p.fuse.select_inputs({{0, x.c()}})(g1), x);
  const Tensor g2 = asf(p.asf_proj(x), p.asf);
  return add(p.fuse(concat_channels({g1, g2})), x);
}

inline Tensor manual_snp(const Tensor& fe, const Tensor* s_next, const SnpParams& p) {
  Tensor cat = fe;
  Tensor up;
  if (s_next) {
    up = resize_bilinear(*s_next, fe.h(), fe.w());
    cat = concat_channels({fe, up});
  }
  const Tensor in1 = p.in1(cat);
  const AttentionOutput att = snp_attention(in1, p.attention);
  const Tensor f_asf = asf(in1, p.asf);
  const Tensor in3 = add(p.global_fuse(concat_channels({att.features, f_asf})), in1);
  const Tensor geb = manual_gcffn(in3, p.gcffn, true);
  const Tensor l1 = p.leb.small.out(p.leb.small.dw(p.leb.small.in(cat)));
  const Tensor l2 = p.leb.large.out(p.leb.large.dw(p.leb.large.in(cat)));
  const Tensor local = add(l1, l2);
  return add(p.out_fuse(concat_channels({geb, local})), in1);
}

inline Tensor manual_mse(const Tensor& f5, const MseParams& p, const std::array<int, 6>& dilations) {
  const Tensor base = p.base(f5);
  std::vector<Tensor> branch;
  Tensor running = base;
  for (int j = 0; j < 6; ++j) {
    ConvSpec spec = p.atrous[j].spec;
    spec.dilation = dilations[j];
    branch.push_back(conv2d(running, spec, p.atrous[j].params));
    running = add(running, branch.back());
  }
  const Tensor pooled = p.gap(global_pool(f5, PoolMode::kAvg));
  branch.push_back(broadcast_spatial(pooled, f5.h(), f5.w()));
  branch.push_back(asf(f5, p.asf));
  const Tensor fused = p.fuse(concat_channels(TensorRefs(branch.begin(), branch.end())));
  return p.head(add(fused, base));
}

inline DciOutput manual_dci(const Tensor& s, const Tensor& semantic, const std::vector<Tensor>& higher,
                     const DciParams& p) {
  const int h = s.h(), w = s.w();
  std::vector<Tensor> cf_parts{s};
  cf_parts.push_back(p.lift[0](resize_bilinear(semantic, h, w)));
  for (std::size_t j = 0; j < higher.size(); ++j) {
    cf_parts.push_back(p.lift[j + 1](resize_bilinear(higher[j], h, w)));
  }
  const Tensor cf = p.fuse_cf(concat_channels(TensorRefs(cf_parts.begin(), cf_parts.end())));

  const Tensor small = msa(p.edge_small(cf), p.edge_small_msa);
  const Tensor large = msa(p.edge_large(cf), p.edge_large_msa);
  const Tensor ed = p.edge_fuse(concat_channels({small, large}));
  const Tensor edge = gradient_function(p.edge_head(ed));

  const Tensor sig = activate(semantic, Activation::kSigmoid);
  Tensor w_small(sig.dims());
  for (std::size_t i = 0; i < sig.size(); ++i) w_small[i] = (1.0f - sig[i]) + 1.0f;
  const Tensor ra = scale_spatial(cf, resize_bilinear(w_small, h, w));

  const Tensor local = add(p.object_small(cf), p.object_large(cf));
  const Tensor spectral = asf(cf, p.asf);
  const Tensor oe = p.object_fuse(concat_channels({spectral, local}));

  const Tensor fused = p.pred_fuse(concat_channels({ed, ra, oe}));
  return {add(p.pred_head(fused), resize_bilinear(semantic, h, w)), edge};
}

}  // namespace compose
