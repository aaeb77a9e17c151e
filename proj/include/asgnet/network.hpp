#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "asgnet/ops.hpp"
#include "asgnet/params.hpp"
#include "asgnet/spectral.hpp"
#include "asgnet/tensor.hpp"

namespace asg {

/// Number of decoded stages (2..5). Arrays indexed by stage use stage - 2.
inline constexpr int kStageCount = 4;
inline constexpr int kFirstStage = 2;
constexpr int stage_slot(int stage) noexcept { return stage - kFirstStage; }

struct EncoderConfig {
  int input_h = 352;
  int input_w = 352;
  /// Encoder output channels for stages 2..5.
  std::array<int, kStageCount> stage_channels{64, 128, 256, 512};
  /// Unified decoder width.
  int width = 96;

  void validate() const;
  /// Reduced encoder (16/32/64/128) for desk-scale runs; width unchanged.
  static EncoderConfig desk(int input_size = 352);
};

struct AblationFlags {
  bool asf_in_snp = true;
  bool asf_in_mse = true;
  bool asf_in_dci = true;
  bool edge_branch = true;
  bool reverse_attention = true;
  std::array<int, 6> dilation_set{3, 6, 9, 12, 15, 18};

  void validate() const;
};

/// Every per-stage tensor the graph produces. Stage-indexed arrays hold
/// stages 2..5 at slots 0..3.
struct StagePyramid {
  std::array<Tensor, kStageCount> encoder;  // F_e
  std::array<Tensor, kStageCount> snp;      // S_m, width channels
  std::array<Tensor, kStageCount> pred;     // 1 channel logits
  std::array<Tensor, kStageCount> edge;     // 1 channel
  Tensor semantic;                          // MSE output, 1 channel, stage-5 grid
  Tensor mask;                              // sigmoid of upsampled stage-2 prediction

  /// Stable (name, tensor) listing used for stage dumps.
  std::vector<std::pair<std::string, const Tensor*>> named() const;
};

/// Optional instrumentation filled by forward(): counts of the ablatable
/// sub-graphs and the channel attention maps, shape (N, C, C) per stage.
struct Trace {
  int asf_snp_calls = 0;
  int asf_mse_calls = 0;
  int asf_dci_calls = 0;
  int edge_calls = 0;
  int reverse_calls = 0;
  std::array<Tensor, kStageCount> attention;
};

// ---- parameter bundles -------------------------------------------------

/// 1x1 -> depthwise kxk -> 1x1.
struct ConvChain {
  ConvLayer in;
  ConvLayer dw;
  ConvLayer out;

  Tensor operator()(const Tensor& x) const { return out(dw(in(x))); }
};

struct EncoderParams {
  std::array<ConvLayer, 2 * kStageCount> convs;
  std::array<NormParams, 2 * kStageCount> norms;
};

/// LN, then independent 1x1 + depthwise 3x3 projections for Q, K and V.
struct AttentionParams {
  NormParams ln;
  std::array<ConvLayer, 3> proj;
  std::array<ConvLayer, 3> dw;
};

struct GcffnParams {
  NormParams ln;
  ConvLayer proj;
  ConvLayer dw_in;
  ConvLayer dw_out;
  ConvLayer asf_proj;
  AsfParams asf;
  ConvLayer fuse;  // [g1, g2] -> width
};

struct LebParams {
  ConvChain small;  // depthwise 3x3
  ConvChain large;  // depthwise 5x5
};

struct SnpParams {
  int stage = 5;
  ConvLayer in1;          // [F_e, S_next] -> width
  AttentionParams attention;
  AsfParams asf;
  ConvLayer global_fuse;  // [F_sam, F_asf] -> width
  GcffnParams gcffn;
  LebParams leb;
  ConvLayer out_fuse;     // [F_geb, F_leb] -> width
};

struct MseParams {
  ConvLayer base;                  // C1 F5
  std::array<ConvLayer, 6> atrous; // 3x3, dilation supplied by AblationFlags
  ConvLayer gap;
  AsfParams asf;
  ConvLayer fuse;                  // 6 local + gap + asf -> width
  ConvLayer head;                  // width -> 1
};

struct DciParams {
  int stage = 5;
  /// Resize-and-lift convs (1 -> width): slot 0 for the semantic map, then
  /// one per available higher-stage prediction.
  std::vector<ConvLayer> lift;
  ConvLayer fuse_cf;
  ConvChain edge_small;
  ConvChain edge_large;
  MsaParams edge_small_msa;
  MsaParams edge_large_msa;
  ConvLayer edge_fuse;
  ConvLayer edge_head;
  ConvChain object_small;
  ConvChain object_large;
  AsfParams asf;
  ConvLayer object_fuse;  // [ASF(D_cf), local] -> width
  ConvLayer pred_fuse;    // [D_ed, D_ra, D_oe] -> width
  ConvLayer pred_head;    // width -> 1

  int higher_count() const noexcept { return static_cast<int>(lift.size()) - 1; }
};

struct AsgNetParams {
  EncoderConfig config;
  EncoderParams encoder;
  std::array<SnpParams, kStageCount> snp;
  MseParams mse;
  std::array<DciParams, kStageCount> dci;
};

AsgNetParams init_params(const EncoderConfig& config, std::uint64_t seed);

/// Number of higher-stage predictions the decoder consumes at `stage`.
int dci_higher_count(int stage) noexcept;

// ---- graph operations --------------------------------------------------

/// Strided conv/BN/ReLU stack producing F_e at H / 2^i for i = 2..5.
std::array<Tensor, kStageCount> stub_encoder(const Tensor& image, const EncoderParams& p,
                                             const EncoderConfig& config);

struct AttentionOutput {
  Tensor features;   // A V reshaped to (N, C, H, W)
  Tensor attention;  // (N, C, C), row-stochastic
};

/// Channel self-attention with logits scaled by 1 / sqrt(H W).
AttentionOutput snp_attention(const Tensor& in1, const AttentionParams& p);

Tensor gcffn(const Tensor& in3, const GcffnParams& p, const AblationFlags& flags,
             Trace* trace = nullptr);
/// `s_next`, when given, must already share the grid of `fe`.
Tensor leb(const Tensor& fe, const Tensor* s_next, const LebParams& p);
/// One SNP stage; `s_next` is null at stage 5 and is otherwise resized
/// bilinearly to the grid of `fe`.
Tensor snp_stage(const Tensor& fe, const Tensor* s_next, const SnpParams& p,
                 const AblationFlags& flags, Trace* trace = nullptr);

/// Densely connected atrous branches over the projected stage-5 feature.
std::array<Tensor, 6> mse_local_branches(const Tensor& base, const MseParams& p,
                                         const AblationFlags& flags);
/// Single-channel semantic map at the stage-5 grid.
Tensor mse(const Tensor& f5, const MseParams& p, const AblationFlags& flags,
           Trace* trace = nullptr);

/// Sobel gradient magnitude of a single-channel map (zero padding).
Tensor gradient_function(const Tensor& edge_feat);

/// 2 - sigmoid(semantic), resized to h x w; one channel, values in [1, 2].
Tensor reverse_weights(const Tensor& semantic, int h, int w);
/// Bilinear resize to h x w followed by a 1x1 conv to the target width.
Tensor lift(const Tensor& map, const ConvLayer& conv, int h, int w);

struct DciOutput {
  Tensor pred;
  Tensor edge;
};

/// One decoder stage. `higher` lists P_{i+1}, P_{i+2}, ... as available.
DciOutput dci_stage(const Tensor& s, const Tensor& semantic, const TensorRefs& higher,
                    const DciParams& p, const AblationFlags& flags, Trace* trace = nullptr);
inline DciOutput dci_stage5(const Tensor& s5, const Tensor& semantic, const DciParams& p,
                            const AblationFlags& flags, Trace* trace = nullptr) {
  return dci_stage(s5, semantic, {}, p, flags, trace);
}

StagePyramid forward(const Tensor& image, const AsgNetParams& params,
                     const AblationFlags& flags = {}, Trace* trace = nullptr);

// ---- parameter traversal -----------------------------------------------

template <Like<ConvChain> C, class F>
void visit_params(C& c, F&& f) {
  visit_params(c.in, f);
  visit_params(c.dw, f);
  visit_params(c.out, f);
}

template <Like<AsgNetParams> P, class F>
void visit_params(P& net, F&& f) {
  for (std::size_t i = 0; i < net.encoder.convs.size(); ++i) {
    visit_params(net.encoder.convs[i], f);
    visit_params(net.encoder.norms[i], f);
  }
  for (auto& s : net.snp) {
    visit_params(s.in1, f);
    visit_params(s.attention.ln, f);
    for (auto& c : s.attention.proj) visit_params(c, f);
    for (auto& c : s.attention.dw) visit_params(c, f);
    visit_params(s.asf, f);
    visit_params(s.global_fuse, f);
    auto& g = s.gcffn;
    visit_params(g.ln, f);
    visit_params(g.proj, f);
    visit_params(g.dw_in, f);
    visit_params(g.dw_out, f);
    visit_params(g.asf_proj, f);
    visit_params(g.asf, f);
    visit_params(g.fuse, f);
    visit_params(s.leb.small, f);
    visit_params(s.leb.large, f);
    visit_params(s.out_fuse, f);
  }
  visit_params(net.mse.base, f);
  for (auto& c : net.mse.atrous) visit_params(c, f);
  visit_params(net.mse.gap, f);
  visit_params(net.mse.asf, f);
  visit_params(net.mse.fuse, f);
  visit_params(net.mse.head, f);
  for (auto& d : net.dci) {
    for (auto& c : d.lift) visit_params(c, f);
    visit_params(d.fuse_cf, f);
    visit_params(d.edge_small, f);
    visit_params(d.edge_large, f);
    visit_params(d.edge_small_msa, f);
    visit_params(d.edge_large_msa, f);
    visit_params(d.edge_fuse, f);
    visit_params(d.edge_head, f);
    visit_params(d.object_small, f);
    visit_params(d.object_large, f);
    visit_params(d.asf, f);
    visit_params(d.object_fuse, f);
    visit_params(d.pred_fuse, f);
    visit_params(d.pred_head, f);
  }
}

}  // namespace asg
