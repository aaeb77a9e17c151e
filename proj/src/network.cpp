#include "asgnet/network.hpp"

#include <cmath>

#include "asgnet/error.hpp"

namespace asg {
namespace {

std::string stage_name(const std::string& prefix, int stage) { return prefix + std::to_string(stage); }

ConvChain init_chain(ParamInit& init, const std::string& name, int in, int width, int kernel) {
  return {init.pointwise(name + ".in", in, width), init.depthwise(name + ".dw", width, kernel),
          init.pointwise(name + ".out", width, width)};
}

// Prefixes every ShapeError raised inside `fn` with the stage it came from.
template <class Fn>
auto in_stage(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const ShapeError& e) {
    throw ShapeError(where + ": " + e.what());
  }
}

}  // namespace

void EncoderConfig::validate() const {
  if (input_h < 32 || input_w < 32 || input_h % 32 != 0 || input_w % 32 != 0) {
    throw ValidationError("input size must be a positive multiple of 32, got " +
                          std::to_string(input_h) + "x" + std::to_string(input_w));
  }
  for (int c : stage_channels) {
    if (c < 1) throw ValidationError("encoder stage channels must be >= 1");
  }
  if (width < 8) throw ValidationError("unified width must be >= 8, got " + std::to_string(width));
}

EncoderConfig EncoderConfig::desk(int input_size) {
  EncoderConfig c;
  c.input_h = c.input_w = input_size;
  c.stage_channels = {16, 32, 64, 128};
  return c;
}

void AblationFlags::validate() const {
  for (int d : dilation_set) {
    if (d < 1) throw ValidationError("dilation rates must be >= 1");
  }
}

std::vector<std::pair<std::string, const Tensor*>> StagePyramid::named() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (int i = 0; i < kStageCount; ++i) {
    const std::string s = std::to_string(i + kFirstStage);
    out.emplace_back("encoder_" + s, &encoder[i]);
    out.emplace_back("snp_" + s, &snp[i]);
    out.emplace_back("pred_" + s, &pred[i]);
    out.emplace_back("edge_" + s, &edge[i]);
  }
  out.emplace_back("semantic", &semantic);
  out.emplace_back("mask", &mask);
  return out;
}

int dci_higher_count(int stage) noexcept { return 5 - stage; }

AsgNetParams init_params(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  ParamInit init(seed);
  AsgNetParams net;
  net.config = config;
  const int u = config.width;
  const auto& ch = config.stage_channels;

  for (int i = 0; i < kStageCount; ++i) {
    const int in = i == 0 ? 3 : ch[i - 1];
    const std::string a = "encoder.conv" + std::to_string(2 * i);
    const std::string b = "encoder.conv" + std::to_string(2 * i + 1);
    net.encoder.convs[2 * i] = init.conv(a, {in, ch[i], 3, 1, 2, false});
    net.encoder.norms[2 * i] = init.norm(a + ".bn", ch[i]);
    net.encoder.convs[2 * i + 1] = init.conv(b, {ch[i], ch[i], 3, 1, i == 0 ? 2 : 1, false});
    net.encoder.norms[2 * i + 1] = init.norm(b + ".bn", ch[i]);
  }

  for (int stage = 5; stage >= kFirstStage; --stage) {
    const int slot = stage_slot(stage);
    const std::string n = stage_name("snp", stage);
    const int cat_in = ch[slot] + (stage == 5 ? 0 : u);
    SnpParams& s = net.snp[slot];
    s.stage = stage;
    s.in1 = init.pointwise(n + ".in1", cat_in, u);
    s.attention.ln = init.norm(n + ".attention.ln", u);
    const char* qkv[3] = {"q", "k", "v"};
    for (int j = 0; j < 3; ++j) {
      s.attention.proj[j] = init.pointwise(n + ".attention." + qkv[j] + "_proj", u, u);
      s.attention.dw[j] = init.depthwise(n + ".attention." + qkv[j] + "_dw", u, 3);
    }
    s.asf = init.asf(n + ".asf", u, u);
    s.global_fuse = init.pointwise(n + ".global_fuse", 2 * u, u);
    s.gcffn.ln = init.norm(n + ".gcffn.ln", u);
    s.gcffn.proj = init.pointwise(n + ".gcffn.proj", u, u);
    s.gcffn.dw_in = init.depthwise(n + ".gcffn.dw_in", u, 3);
    s.gcffn.dw_out = init.depthwise(n + ".gcffn.dw_out", u, 3);
    s.gcffn.asf_proj = init.pointwise(n + ".gcffn.asf_proj", u, u);
    s.gcffn.asf = init.asf(n + ".gcffn.asf", u, u);
    s.gcffn.fuse = init.pointwise(n + ".gcffn.fuse", 2 * u, u);
    s.leb.small = init_chain(init, n + ".leb.small", cat_in, u, 3);
    s.leb.large = init_chain(init, n + ".leb.large", cat_in, u, 5);
    s.out_fuse = init.pointwise(n + ".out_fuse", 2 * u, u);
  }

  const int c5 = ch[stage_slot(5)];
  net.mse.base = init.pointwise("mse.base", c5, u);
  const AblationFlags defaults;
  for (int j = 0; j < 6; ++j) {
    net.mse.atrous[j] =
        init.conv("mse.atrous" + std::to_string(j), {u, u, 3, defaults.dilation_set[j], 1, false});
  }
  net.mse.gap = init.pointwise("mse.gap", c5, u);
  net.mse.asf = init.asf("mse.asf", c5, u);
  net.mse.fuse = init.pointwise("mse.fuse", 8 * u, u);
  net.mse.head = init.pointwise("mse.head", u, 1);

  for (int stage = 5; stage >= kFirstStage; --stage) {
    const std::string n = stage_name("dci", stage);
    DciParams& d = net.dci[stage_slot(stage)];
    d.stage = stage;
    const int lifts = 1 + dci_higher_count(stage);
    for (int j = 0; j < lifts; ++j) d.lift.push_back(init.pointwise(n + ".lift" + std::to_string(j), 1, u));
    d.fuse_cf = init.pointwise(n + ".fuse_cf", (1 + lifts) * u, u);
    d.edge_small = init_chain(init, n + ".edge_small", u, u, 3);
    d.edge_large = init_chain(init, n + ".edge_large", u, u, 5);
    d.edge_small_msa = init.msa(n + ".edge_small_msa", u);
    d.edge_large_msa = init.msa(n + ".edge_large_msa", u);
    d.edge_fuse = init.pointwise(n + ".edge_fuse", 2 * u, u);
    d.edge_head = init.pointwise(n + ".edge_head", u, 1);
    d.object_small = init_chain(init, n + ".object_small", u, u, 3);
    d.object_large = init_chain(init, n + ".object_large", u, u, 5);
    d.asf = init.asf(n + ".asf", u, u);
    d.object_fuse = init.pointwise(n + ".object_fuse", 2 * u, u);
    d.pred_fuse = init.pointwise(n + ".pred_fuse", 3 * u, u);
    d.pred_head = init.pointwise(n + ".pred_head", u, 1);
  }
  return net;
}

std::array<Tensor, kStageCount> stub_encoder(const Tensor& image, const EncoderParams& p,
                                             const EncoderConfig& config) {
  if (image.rank() != 4 || image.c() != 3) {
    throw ShapeError("encoder: expected (N, 3, H, W) image, got " + shape_string(image.dims()));
  }
  if (image.h() % 32 != 0 || image.w() % 32 != 0) {
    throw ShapeError("encoder: image size " + std::to_string(image.h()) + "x" +
                     std::to_string(image.w()) + " is not divisible by 32");
  }
  (void)config;
  std::array<Tensor, kStageCount> out;
  Tensor x = image;
  for (int i = 0; i < kStageCount; ++i) {
    x = batch_norm_act(p.convs[2 * i](x), p.norms[2 * i]);
    x = batch_norm_act(p.convs[2 * i + 1](x), p.norms[2 * i + 1]);
    out[i] = x;
  }
  return out;
}

AttentionOutput snp_attention(const Tensor& in1, const AttentionParams& p) {
  const Tensor normed = layer_norm(in1, p.ln);
  const Tensor q = p.dw[0](p.proj[0](normed));
  const Tensor k = p.dw[1](p.proj[1](normed));
  const Tensor v = p.dw[2](p.proj[2](normed));
  const int n_batch = in1.n(), c = in1.c(), hw = static_cast<int>(in1.plane());
  const float scale = static_cast<float>(1.0 / std::sqrt(static_cast<double>(hw)));

  AttentionOutput out{Tensor(in1.dims()), Tensor({n_batch, c, c})};
  for (int n = 0; n < n_batch; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * c * hw;
    auto plane = [&](const Tensor& t) {
      return Tensor({c, hw}, std::vector<float>(t.data().begin() + base, t.data().begin() + base + c * hw));
    };
    Tensor logits = matmul(plane(q), transpose2d(plane(k)));
    for (float& l : logits.data()) l *= scale;
    const Tensor attn = softmax_rows(logits);
    const Tensor mixed = matmul(attn, plane(v));
    std::copy(mixed.data().begin(), mixed.data().end(), out.features.data().begin() + base);
    std::copy(attn.data().begin(), attn.data().end(),
              out.attention.data().begin() + static_cast<std::size_t>(n) * c * c);
  }
  return out;
}

Tensor gcffn(const Tensor& in3, const GcffnParams& p, const AblationFlags& flags, Trace* trace) {
  const Tensor a = p.dw_in(p.proj(layer_norm(in3, p.ln)));
  const Tensor g1 = p.dw_out(multiply(activate(a, Activation::kGelu), a));
  if (!flags.asf_in_snp) {
    return add(p.fuse.select_inputs({{0, in3.c()}})(g1), in3);
  }
  if (trace) ++trace->asf_snp_calls;
  const Tensor g2 = asf(p.asf_proj(in3), p.asf);
  return add(p.fuse(concat_channels({g1, g2})), in3);
}

Tensor leb(const Tensor& fe, const Tensor* s_next, const LebParams& p) {
  const Tensor cat = s_next ? concat_channels({fe, *s_next}) : fe;
  return add(p.small(cat), p.large(cat));
}

Tensor snp_stage(const Tensor& fe, const Tensor* s_next, const SnpParams& p,
                 const AblationFlags& flags, Trace* trace) {
  Tensor up;
  if (s_next) up = resize_bilinear(*s_next, fe.h(), fe.w());
  const Tensor* next = s_next ? &up : nullptr;
  const Tensor cat = next ? concat_channels({fe, up}) : fe;
  const Tensor in1 = p.in1(cat);
  AttentionOutput att = snp_attention(in1, p.attention);
  if (trace) trace->attention[stage_slot(p.stage)] = std::move(att.attention);

  Tensor in3;
  if (flags.asf_in_snp) {
    if (trace) ++trace->asf_snp_calls;
    const Tensor f_asf = asf(in1, p.asf);
    in3 = add(p.global_fuse(concat_channels({att.features, f_asf})), in1);
  } else {
    in3 = add(p.global_fuse.select_inputs({{0, in1.c()}})(att.features), in1);
  }
  const Tensor geb = gcffn(in3, p.gcffn, flags, trace);
  const Tensor local = leb(fe, next, p.leb);
  return add(p.out_fuse(concat_channels({geb, local})), in1);
}

std::array<Tensor, 6> mse_local_branches(const Tensor& base, const MseParams& p,
                                         const AblationFlags& flags) {
  std::array<Tensor, 6> out;
  Tensor running = base;
  for (int j = 0; j < 6; ++j) {
    ConvSpec spec = p.atrous[j].spec;
    spec.dilation = flags.dilation_set[j];
    out[j] = conv2d(running, spec, p.atrous[j].params);
    if (j + 1 < 6) running = add(running, out[j]);
  }
  return out;
}

Tensor mse(const Tensor& f5, const MseParams& p, const AblationFlags& flags, Trace* trace) {
  const Tensor base = p.base(f5);
  const auto local = mse_local_branches(base, p, flags);
  const Tensor gap = broadcast_spatial(p.gap(global_pool(f5, PoolMode::kAvg)), f5.h(), f5.w());
  TensorRefs parts(local.begin(), local.end());
  parts.emplace_back(gap);
  Tensor fused;
  if (flags.asf_in_mse) {
    if (trace) ++trace->asf_mse_calls;
    const Tensor f_asf = asf(f5, p.asf);
    parts.emplace_back(f_asf);
    fused = p.fuse(concat_channels(parts));
  } else {
    fused = p.fuse.select_inputs({{0, 7 * base.c()}})(concat_channels(parts));
  }
  return p.head(add(fused, base));
}

Tensor gradient_function(const Tensor& edge_feat) {
  if (edge_feat.rank() != 4 || edge_feat.c() != 1) {
    throw ShapeError("gradient_function: expected one channel, got " + shape_string(edge_feat.dims()));
  }
  const ConvSpec spec{1, 1, 3, 1, 1, false};
  const LayerParams gx{"sobel_x", Tensor({1, 1, 3, 3}, {-1, 0, 1, -2, 0, 2, -1, 0, 1}), Tensor({1})};
  const LayerParams gy{"sobel_y", Tensor({1, 1, 3, 3}, {-1, -2, -1, 0, 0, 0, 1, 2, 1}), Tensor({1})};
  const Tensor dx = conv2d(edge_feat, spec, gx);
  const Tensor dy = conv2d(edge_feat, spec, gy);
  Tensor out(edge_feat.dims());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(std::hypot(static_cast<double>(dx[i]), static_cast<double>(dy[i])));
  }
  return out;
}

Tensor reverse_weights(const Tensor& semantic, int h, int w) {
  Tensor rw = activate(semantic, Activation::kSigmoid);
  for (float& v : rw.data()) v = (1.0f - v) + 1.0f;
  return resize_bilinear(rw, h, w);
}

Tensor lift(const Tensor& map, const ConvLayer& conv, int h, int w) {
  return conv(resize_bilinear(map, h, w));
}

DciOutput dci_stage(const Tensor& s, const Tensor& semantic, const TensorRefs& higher,
                    const DciParams& p, const AblationFlags& flags, Trace* trace) {
  if (static_cast<int>(higher.size()) != p.higher_count()) {
    throw ShapeError("dci stage " + std::to_string(p.stage) + ": expected " +
                     std::to_string(p.higher_count()) + " higher predictions, got " +
                     std::to_string(higher.size()));
  }
  const int h = s.h(), w = s.w(), u = s.c();
  std::vector<Tensor> lifted;
  lifted.push_back(lift(semantic, p.lift[0], h, w));
  for (std::size_t j = 0; j < higher.size(); ++j) lifted.push_back(lift(higher[j], p.lift[j + 1], h, w));
  TensorRefs cf_parts{s};
  cf_parts.insert(cf_parts.end(), lifted.begin(), lifted.end());
  const Tensor cf = p.fuse_cf(concat_channels(cf_parts));

  DciOutput out;
  std::vector<Tensor> parts;
  std::vector<std::pair<int, int>> kept;
  if (flags.edge_branch) {
    if (trace) ++trace->edge_calls;
    const Tensor small = msa(p.edge_small(cf), p.edge_small_msa);
    const Tensor large = msa(p.edge_large(cf), p.edge_large_msa);
    const Tensor ed = p.edge_fuse(concat_channels({small, large}));
    out.edge = gradient_function(p.edge_head(ed));
    parts.push_back(ed);
    kept.emplace_back(0, u);
  } else {
    out.edge = Tensor({s.n(), 1, h, w});
  }
  if (flags.reverse_attention) {
    if (trace) ++trace->reverse_calls;
    parts.push_back(scale_spatial(cf, reverse_weights(semantic, h, w)));
    kept.emplace_back(u, 2 * u);
  }
  const Tensor local = add(p.object_small(cf), p.object_large(cf));
  if (flags.asf_in_dci) {
    if (trace) ++trace->asf_dci_calls;
    const Tensor spectral = asf(cf, p.asf);
    parts.push_back(p.object_fuse(concat_channels({spectral, local})));
  } else {
    parts.push_back(p.object_fuse.select_inputs({{u, 2 * u}})(local));
  }
  kept.emplace_back(2 * u, 3 * u);

  const Tensor fused = kept.size() == 3 ? p.pred_fuse(concat_channels(TensorRefs(parts.begin(), parts.end())))
                                        : p.pred_fuse.select_inputs(kept)(
                                              concat_channels(TensorRefs(parts.begin(), parts.end())));
  out.pred = add(p.pred_head(fused), resize_bilinear(semantic, h, w));
  return out;
}

StagePyramid forward(const Tensor& image, const AsgNetParams& params, const AblationFlags& flags,
                     Trace* trace) {
  flags.validate();
  StagePyramid pyr;
  pyr.encoder = in_stage("encoder", [&] { return stub_encoder(image, params.encoder, params.config); });

  for (int stage = 5; stage >= kFirstStage; --stage) {
    const int slot = stage_slot(stage);
    const Tensor* s_next = stage == 5 ? nullptr : &pyr.snp[slot + 1];
    pyr.snp[slot] = in_stage(stage_name("snp stage ", stage), [&] {
      return snp_stage(pyr.encoder[slot], s_next, params.snp[slot], flags, trace);
    });
  }
  pyr.semantic = in_stage("mse", [&] { return mse(pyr.encoder[stage_slot(5)], params.mse, flags, trace); });

  for (int stage = 5; stage >= kFirstStage; --stage) {
    const int slot = stage_slot(stage);
    TensorRefs higher;
    for (int j = stage + 1; j <= 5; ++j) higher.emplace_back(pyr.pred[stage_slot(j)]);
    DciOutput d = in_stage(stage_name("dci stage ", stage), [&] {
      return dci_stage(pyr.snp[slot], pyr.semantic, higher, params.dci[slot], flags, trace);
    });
    pyr.pred[slot] = std::move(d.pred);
    pyr.edge[slot] = std::move(d.edge);
  }
  pyr.mask = activate(resize_bilinear(pyr.pred[0], image.h(), image.w()), Activation::kSigmoid);
  return pyr;
}

}  // namespace asg
