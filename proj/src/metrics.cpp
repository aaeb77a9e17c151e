#include "asgnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>

#include "asgnet/distance_transform.hpp"
#include "asgnet/error.hpp"
#include "asgnet/io.hpp"

namespace asg::metrics {
namespace {

// Single-channel view of a rank-2 or (1, 1, H, W) tensor.
struct Plane {
  int h = 0;
  int w = 0;
  std::span<const float> v;

  float at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
  std::size_t size() const { return v.size(); }
};

Plane plane_of(const Tensor& t, const char* what) {
  if (t.rank() == 2) return {t.dim(0), t.dim(1), t.data()};
  if (t.rank() == 4 && t.n() == 1 && t.c() == 1) return {t.h(), t.w(), t.data()};
  throw ShapeError(std::string(what) + ": expected (H, W) or (1, 1, H, W), got " + shape_string(t.dims()));
}

std::pair<Plane, Plane> pair_of(const Tensor& pred, const Tensor& gt, const char* op) {
  Plane p = plane_of(pred, op), g = plane_of(gt, op);
  if (p.h != g.h || p.w != g.w) {
    throw ShapeError(std::string(op) + ": prediction grid " + std::to_string(p.h) + "x" +
                     std::to_string(p.w) + " differs from ground truth " + std::to_string(g.h) + "x" +
                     std::to_string(g.w));
  }
  for (float v : g.v) {
    if (v != 0.0f && v != 1.0f) throw ValidationError(std::string(op) + ": ground truth must be binary");
  }
  return {p, g};
}

// Mean over a rectangular block [y0, y1) x [x0, x1) of `values`.
struct Block {
  int y0, y1, x0, x1;
  int count() const { return (y1 - y0) * (x1 - x0); }
};

double ssim(const std::vector<double>& pred, const std::vector<double>& gt) {
  const double n = static_cast<double>(pred.size());
  double x = 0.0, y = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    x += pred[i];
    y += gt[i];
  }
  x /= n;
  y /= n;
  double sx2 = 0.0, sy2 = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sx2 += (pred[i] - x) * (pred[i] - x);
    sy2 += (gt[i] - y) * (gt[i] - y);
    sxy += (pred[i] - x) * (gt[i] - y);
  }
  sx2 /= (n - 1.0 + kEps);
  sy2 /= (n - 1.0 + kEps);
  sxy /= (n - 1.0 + kEps);
  const double alpha = 4.0 * x * y * sxy;
  const double beta = (x * x + y * y) * (sx2 + sy2);
  if (alpha != 0.0) return alpha / (beta + kEps);
  return beta == 0.0 ? 1.0 : 0.0;
}

double object_score(const std::vector<double>& values) {
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sigma = values.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  return 2.0 * mean / (mean * mean + 1.0 + sigma + kEps);
}

double s_object(const Plane& p, const Plane& g) {
  std::vector<double> fg, bg;
  double u = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (g.v[i] == 1.0f) {
      fg.push_back(p.v[i]);
      u += 1.0;
    } else {
      bg.push_back(1.0 - p.v[i]);
    }
  }
  u /= static_cast<double>(p.size());
  return u * object_score(fg) + (1.0 - u) * object_score(bg);
}

double s_region(const Plane& p, const Plane& g) {
  double total = 0.0, sx = 0.0, sy = 0.0;
  for (int y = 0; y < g.h; ++y) {
    for (int x = 0; x < g.w; ++x) {
      const double v = g.at(y, x);
      total += v;
      sx += v * (x + 1);
      sy += v * (y + 1);
    }
  }
  // Split column/row in 1-based centroid units: left block is [0, cx).
  const int cx = static_cast<int>(std::round(sx / total));
  const int cy = static_cast<int>(std::round(sy / total));
  const Block blocks[4] = {{0, cy, 0, cx}, {0, cy, cx, g.w}, {cy, g.h, 0, cx}, {cy, g.h, cx, g.w}};
  const double area = static_cast<double>(g.size());
  double q = 0.0;
  for (const Block& b : blocks) {
    if (b.count() <= 0) continue;
    std::vector<double> pv, gv;
    for (int y = b.y0; y < b.y1; ++y) {
      for (int x = b.x0; x < b.x1; ++x) {
        pv.push_back(p.at(y, x));
        gv.push_back(g.at(y, x));
      }
    }
    q += (b.count() / area) * ssim(pv, gv);
  }
  return q;
}

std::vector<double> gaussian_kernel7() {
  std::vector<double> k(49);
  double sum = 0.0;
  for (int y = -3; y <= 3; ++y) {
    for (int x = -3; x <= 3; ++x) {
      const double v = std::exp(-(x * x + y * y) / (2.0 * 25.0));
      k[(y + 3) * 7 + (x + 3)] = v;
      sum += v;
    }
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace

double mae(const Tensor& pred, const Tensor& gt) {
  const auto [p, g] = pair_of(pred, gt, "mae");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(static_cast<double>(p.v[i]) - g.v[i]);
  return sum / static_cast<double>(p.size());
}

DiceIou dice_iou(const Tensor& pred, const Tensor& gt, double threshold) {
  const auto [p, g] = pair_of(pred, gt, "dice_iou");
  double tp = 0.0, fp = 0.0, fn = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool pb = p.v[i] >= threshold, gb = g.v[i] == 1.0f;
    tp += pb && gb;
    fp += pb && !gb;
    fn += !pb && gb;
  }
  if (tp + fp + fn == 0.0) return {1.0, 1.0};
  return {2.0 * tp / (2.0 * tp + fp + fn), tp / (tp + fp + fn)};
}

double weighted_fmeasure(const Tensor& pred, const Tensor& gt) {
  const auto [p, g] = pair_of(pred, gt, "weighted_fmeasure");
  const int h = g.h, w = g.w;
  const std::size_t n = p.size();
  std::vector<std::uint8_t> fg(n);
  double fg_count = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    fg[i] = g.v[i] == 1.0f;
    fg_count += fg[i];
  }
  if (fg_count == 0.0) {
    const bool pred_empty = std::all_of(p.v.begin(), p.v.end(), [](float v) { return v == 0.0f; });
    return pred_empty ? 1.0 : 0.0;
  }

  std::vector<double> err(n);
  for (std::size_t i = 0; i < n; ++i) err[i] = std::abs(static_cast<double>(p.v[i]) - g.v[i]);

  // Background pixels inherit the error of their nearest foreground pixel.
  const DistanceField field = distance_to_foreground(fg, h, w);
  std::vector<double> spread(n);
  for (std::size_t i = 0; i < n; ++i) spread[i] = fg[i] ? err[i] : err[field.nearest[i]];

  const auto kernel = gaussian_kernel7();
  std::vector<double> smoothed(n);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int ky = -3; ky <= 3; ++ky) {
        const int yy = std::clamp(y + ky, 0, h - 1);
        for (int kx = -3; kx <= 3; ++kx) {
          const int xx = std::clamp(x + kx, 0, w - 1);
          acc += kernel[(ky + 3) * 7 + (kx + 3)] * spread[static_cast<std::size_t>(yy) * w + xx];
        }
      }
      smoothed[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }

  const double alpha = std::log(0.5) / 5.0;
  double fg_err = 0.0, bg_err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (fg[i]) {
      fg_err += std::min(err[i], smoothed[i]);
    } else {
      bg_err += err[i] * (2.0 - std::exp(alpha * field.distance[i]));
    }
  }
  const double tp = fg_count - fg_err;
  const double recall = 1.0 - fg_err / fg_count;
  const double precision = tp / (kEps + tp + bg_err);
  return 2.0 * recall * precision / (kEps + recall + precision);
}

double s_measure(const Tensor& pred, const Tensor& gt) {
  const auto [p, g] = pair_of(pred, gt, "s_measure");
  double gt_mean = 0.0, pred_mean = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    gt_mean += g.v[i];
    pred_mean += p.v[i];
  }
  gt_mean /= static_cast<double>(p.size());
  pred_mean /= static_cast<double>(p.size());
  if (gt_mean == 0.0) return 1.0 - pred_mean;
  if (gt_mean == 1.0) return pred_mean;
  const double q = 0.5 * s_object(p, g) + 0.5 * s_region(p, g);
  return std::max(q, 0.0);
}

double e_measure(const Tensor& pred, const Tensor& gt) {
  const auto [p, g] = pair_of(pred, gt, "e_measure");
  const std::size_t n = p.size();
  double mean = 0.0;
  for (float v : p.v) mean += v;
  mean /= static_cast<double>(n);
  const double threshold = std::min(2.0 * mean, 1.0);

  std::vector<double> fm(n);
  double fm_mean = 0.0, gt_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    fm[i] = (p.v[i] >= threshold && p.v[i] > 0.0f) ? 1.0 : 0.0;
    fm_mean += fm[i];
    gt_mean += g.v[i];
  }
  fm_mean /= static_cast<double>(n);
  gt_mean /= static_cast<double>(n);

  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (gt_mean == 0.0) {
      sum += 1.0 - fm[i];
    } else if (gt_mean == 1.0) {
      sum += fm[i];
    } else {
      const double a = fm[i] - fm_mean, b = g.v[i] - gt_mean;
      const double align = 2.0 * a * b / (a * a + b * b + kEps);
      sum += (align + 1.0) * (align + 1.0) / 4.0;
    }
  }
  return sum / static_cast<double>(n);
}

MetricValues evaluate(const Tensor& pred, const Tensor& gt, double threshold) {
  const DiceIou di = dice_iou(pred, gt, threshold);
  return {di.dic, di.iou, weighted_fmeasure(pred, gt), s_measure(pred, gt), e_measure(pred, gt), mae(pred, gt)};
}

MetricValues mean_of(const std::vector<ImageMetrics>& images) {
  MetricValues m;
  if (images.empty()) return m;
  for (const auto& im : images) {
    m.dic += im.values.dic;
    m.iou += im.values.iou;
    m.fwb += im.values.fwb;
    m.sm += im.values.sm;
    m.em += im.values.em;
    m.mae += im.values.mae;
  }
  const double k = static_cast<double>(images.size());
  return {m.dic / k, m.iou / k, m.fwb / k, m.sm / k, m.em / k, m.mae / k};
}

MetricReport evaluate_dir(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                          double threshold) {
  namespace fs = std::filesystem;
  auto list = [](const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::set<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file()) names.insert(entry.path().filename().string());
    }
    return names;
  };
  const auto preds = list(pred_dir);
  const auto gts = list(gt_dir);
  std::string unmatched;
  for (const auto& n : preds) {
    if (!gts.count(n)) unmatched += " " + n + " (no ground truth)";
  }
  for (const auto& n : gts) {
    if (!preds.count(n)) unmatched += " " + n + " (no prediction)";
  }
  if (!unmatched.empty()) throw ValidationError("unmatched files:" + unmatched);
  if (preds.empty()) throw ValidationError("no pairs: " + pred_dir.string() + " contains no images");

  MetricReport report;
  for (const auto& name : preds) {
    const Tensor pred = read_image(pred_dir / name);
    const Tensor gt = read_image(gt_dir / name, /*binarize=*/true);
    if (pred.c() != 1 || gt.c() != 1) throw ValidationError(name + ": expected grayscale images");
    if (pred.h() != gt.h() || pred.w() != gt.w()) {
      throw ShapeError(name + ": prediction " + std::to_string(pred.h()) + "x" + std::to_string(pred.w()) +
                       " vs ground truth " + std::to_string(gt.h()) + "x" + std::to_string(gt.w()));
    }
    report.images.push_back({name, evaluate(pred, gt, threshold)});
  }
  report.mean = mean_of(report.images);
  return report;
}

std::string format_record(const ImageMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, " %.6f %.6f %.6f %.6f %.6f %.6f\n", m.values.dic, m.values.iou,
                m.values.fwb, m.values.sm, m.values.em, m.values.mae);
  return m.name + buf;
}

void write_records(std::ostream& os, const MetricReport& report) {
  for (const auto& m : report.images) os << format_record(m);
}

void write_table(std::ostream& os, const MetricReport& report) {
  std::size_t width = 4;
  for (const auto& m : report.images) width = std::max(width, m.name.size());
  auto row = [&](const std::string& name, const MetricValues& v) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "  %8.6f  %8.6f  %8.6f  %8.6f  %8.6f  %8.6f\n", v.dic, v.iou, v.fwb,
                  v.sm, v.em, v.mae);
    os << name << std::string(width - name.size(), ' ') << buf;
  };
  os << "name" << std::string(width - 4, ' ')
     << "  Dic       IoU       Fwb       Sm        Em        MAE\n";
  for (const auto& m : report.images) row(m.name, m.values);
  row("mean", report.mean);
}

}  // namespace asg::metrics
