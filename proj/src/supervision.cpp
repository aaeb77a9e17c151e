#include "asgnet/supervision.hpp"

#include <algorithm>
#include <cmath>

#include "asgnet/error.hpp"

namespace asg {
namespace {

void require_binary(const Tensor& gt, const char* op) {
  for (float v : gt.data()) {
    if (v != 0.0f && v != 1.0f) throw ValidationError(std::string(op) + ": ground truth must be binary");
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.dims()) + " vs " +
                     shape_string(b.dims()));
  }
}

double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// Morphological 3x3 max (dilate) or min (erode) ignoring out-of-bounds pixels.
Tensor morph3(const Tensor& x, bool dilate) {
  Tensor out(x.dims());
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      for (int y = 0; y < x.h(); ++y) {
        for (int xx = 0; xx < x.w(); ++xx) {
          float v = x.at(n, c, y, xx);
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              const int yy = y + dy, xq = xx + dx;
              if (yy < 0 || yy >= x.h() || xq < 0 || xq >= x.w()) continue;
              const float q = x.at(n, c, yy, xq);
              v = dilate ? std::max(v, q) : std::min(v, q);
            }
          }
          out.at(n, c, y, xx) = v;
        }
      }
    }
  }
  return out;
}

}  // namespace

PixelWeights PixelWeights::from_mask(const Tensor& gt) {
  if (gt.rank() != 4) throw ShapeError("pixel weights: mask must be rank 4");
  const int h = gt.h(), w = gt.w(), r = kWeightWindow / 2;
  Tensor out(gt.dims());
  std::vector<double> integral(static_cast<std::size_t>(h + 1) * (w + 1));
  auto at = [&](int y, int x) -> double& { return integral[static_cast<std::size_t>(y) * (w + 1) + x]; };
  for (int n = 0; n < gt.n(); ++n) {
    for (int c = 0; c < gt.c(); ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          at(y + 1, x + 1) = gt.at(n, c, y, x) + at(y, x + 1) + at(y + 1, x) - at(y, x);
        }
      }
      for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - r), y1 = std::min(h, y + r + 1);
        for (int x = 0; x < w; ++x) {
          const int x0 = std::max(0, x - r), x1 = std::min(w, x + r + 1);
          const double sum = at(y1, x1) - at(y0, x1) - at(y1, x0) + at(y0, x0);
          const double mean = sum / (static_cast<double>(y1 - y0) * (x1 - x0));
          out.at(n, c, y, x) = static_cast<float>(1.0 + kWeightGain * std::abs(mean - gt.at(n, c, y, x)));
        }
      }
    }
  }
  return {std::move(out)};
}

Tensor edge_gt(const Tensor& mask) {
  if (mask.rank() != 4) throw ShapeError("edge_gt: mask must be rank 4");
  require_binary(mask, "edge_gt");
  const Tensor dilated = morph3(mask, true);
  const Tensor eroded = morph3(mask, false);
  Tensor out(mask.dims());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dilated[i] - eroded[i];
  return out;
}

LossGrad weighted_bce(const Tensor& logits, const Tensor& gt, const PixelWeights& w) {
  require_same(logits, gt, "weighted_bce");
  require_same(logits, w.w, "weighted_bce weights");
  require_binary(gt, "weighted_bce");
  double weight_sum = 0.0, total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i], g = gt[i], wi = w.w[i];
    weight_sum += wi;
    total += wi * (std::max(z, 0.0) - z * g + std::log1p(std::exp(-std::abs(z))));
  }
  LossGrad out{total / weight_sum, Tensor(logits.dims())};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.grad[i] = static_cast<float>(w.w[i] * (sigmoid(logits[i]) - gt[i]) / weight_sum);
  }
  return out;
}

LossGrad weighted_iou(const Tensor& logits, const Tensor& gt, const PixelWeights& w) {
  require_same(logits, gt, "weighted_iou");
  require_same(logits, w.w, "weighted_iou weights");
  require_binary(gt, "weighted_iou");
  double inter = kOverlapSmoothing, uni = kOverlapSmoothing;
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = sigmoid(logits[i]);
    const double g = gt[i], wi = w.w[i];
    inter += wi * p[i] * g;
    uni += wi * (p[i] + g - p[i] * g);
  }
  LossGrad out{1.0 - inter / uni, Tensor(logits.dims())};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double g = gt[i], wi = w.w[i];
    // d(inter)/dp = w g, d(uni)/dp = w (1 - g)
    const double dloss_dp = -(wi * g * uni - inter * wi * (1.0 - g)) / (uni * uni);
    out.grad[i] = static_cast<float>(dloss_dp * p[i] * (1.0 - p[i]));
  }
  return out;
}

LossGrad dice_loss(const Tensor& logits, const Tensor& gt) {
  require_same(logits, gt, "dice_loss");
  require_binary(gt, "dice_loss");
  std::vector<double> p(logits.size());
  double overlap = 0.0, sum_p = 0.0, sum_g = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = sigmoid(logits[i]);
    overlap += p[i] * gt[i];
    sum_p += p[i];
    sum_g += gt[i];
  }
  const double num = 2.0 * overlap + kOverlapSmoothing;
  const double den = sum_p + sum_g + kOverlapSmoothing;
  LossGrad out{1.0 - num / den, Tensor(logits.dims())};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double dloss_dp = -(2.0 * gt[i] * den - num) / (den * den);
    out.grad[i] = static_cast<float>(dloss_dp * p[i] * (1.0 - p[i]));
  }
  return out;
}

LossBundle total_loss(const StagePyramid& pyramid, const Tensor& gt_mask) {
  if (gt_mask.rank() != 4 || gt_mask.c() != 1) {
    throw ShapeError("total_loss: ground truth must be (N, 1, H, W), got " + shape_string(gt_mask.dims()));
  }
  require_binary(gt_mask, "total_loss");
  const int h = gt_mask.h(), w = gt_mask.w();
  const PixelWeights weights = PixelWeights::from_mask(gt_mask);
  const Tensor edges = edge_gt(gt_mask);

  auto upsampled = [&](const Tensor& t, const std::string& name) {
    if (t.empty()) throw ValidationError("total_loss: pyramid field '" + name + "' is missing");
    return resize_bilinear(t, h, w);
  };

  LossBundle b;
  auto add_prediction = [&](const Tensor& t, const std::string& name) {
    const Tensor z = upsampled(t, name);
    StageLoss s{name, weighted_bce(z, gt_mask, weights).loss, weighted_iou(z, gt_mask, weights).loss, 0.0};
    b.wbce += s.wbce;
    b.wiou += s.wiou;
    b.stages.push_back(s);
  };
  for (int i = 0; i < kStageCount; ++i) add_prediction(pyramid.pred[i], "pred_" + std::to_string(i + kFirstStage));
  add_prediction(pyramid.semantic, "semantic");
  for (int i = 0; i < kStageCount; ++i) {
    const std::string name = "edge_" + std::to_string(i + kFirstStage);
    StageLoss s{name, 0.0, 0.0, dice_loss(upsampled(pyramid.edge[i], name), edges).loss};
    b.dice += s.dice;
    b.stages.push_back(s);
  }
  b.total = b.wbce + b.wiou + b.dice;
  return b;
}

GradCheckResult check_gradient(const LossFn& fn, const Tensor& logits, double h) {
  const LossGrad analytic = fn(logits);
  GradCheckResult r;
  Tensor probe = logits;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const float zp = static_cast<float>(logits[i] + h);
    const float zm = static_cast<float>(logits[i] - h);
    probe[i] = zp;
    const double up = fn(probe).loss;
    probe[i] = zm;
    const double down = fn(probe).loss;
    probe[i] = logits[i];
    const double numeric = (up - down) / (static_cast<double>(zp) - static_cast<double>(zm));
    const double a = analytic.grad[i];
    const double abs_err = std::abs(a - numeric);
    const double scale = std::max({std::abs(a), std::abs(numeric), 1e-8});
    r.max_abs_error = std::max(r.max_abs_error, abs_err);
    r.max_rel_error = std::max(r.max_rel_error, abs_err / scale);
  }
  return r;
}

}  // namespace asg
