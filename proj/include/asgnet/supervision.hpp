#pragma once

#include <functional>
#include <string>
#include <vector>

#include "asgnet/network.hpp"
#include "asgnet/tensor.hpp"

namespace asg {

/// Border-emphasis pixel weights: w = 1 + 5 |avgpool_31(gt) - gt|, where the
/// average runs over the in-bounds part of each 31x31 window.
struct PixelWeights {
  Tensor w;

  static PixelWeights from_mask(const Tensor& gt);
  static PixelWeights uniform(const std::vector<int>& dims) { return {Tensor(dims, 1.0f)}; }
};

inline constexpr int kWeightWindow = 31;
inline constexpr double kWeightGain = 5.0;
inline constexpr double kOverlapSmoothing = 1.0;

/// A scalar loss and its gradient with respect to the logits.
struct LossGrad {
  double loss = 0.0;
  Tensor grad;
};

/// 3x3 morphological gradient (dilate - erode) of a binary mask; pixels
/// outside the image are ignored by both operators.
Tensor edge_gt(const Tensor& mask);

LossGrad weighted_bce(const Tensor& logits, const Tensor& gt, const PixelWeights& w);
LossGrad weighted_iou(const Tensor& logits, const Tensor& gt, const PixelWeights& w);
LossGrad dice_loss(const Tensor& logits, const Tensor& gt);

struct StageLoss {
  std::string map;  // "pred_2", "semantic", "edge_5", ...
  double wbce = 0.0;
  double wiou = 0.0;
  double dice = 0.0;
};

struct LossBundle {
  double total = 0.0;
  double wbce = 0.0;
  double wiou = 0.0;
  double dice = 0.0;
  std::vector<StageLoss> stages;
};

/// wBCE + wIoU over the four predictions and the semantic map, Dice over the
/// four edge maps. Every map is bilinearly upsampled to the mask grid first.
LossBundle total_loss(const StagePyramid& pyramid, const Tensor& gt_mask);

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

using LossFn = std::function<LossGrad(const Tensor&)>;

/// Compares the analytic gradient of `fn` at `logits` against central
/// differences with step h. The effective step is measured after float
/// rounding of the perturbed logits.
GradCheckResult check_gradient(const LossFn& fn, const Tensor& logits, double h = 1e-3);

}  // namespace asg
