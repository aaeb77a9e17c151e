#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "asgnet/tensor.hpp"

namespace asg::metrics {

/// The six evaluation measures for one image or a dataset mean. Every field
/// lies in [0, 1]; only `mae` is lower-is-better.
struct MetricValues {
  double dic = 0.0;
  double iou = 0.0;
  double fwb = 0.0;
  double sm = 0.0;
  double em = 0.0;
  double mae = 0.0;
};

struct ImageMetrics {
  std::string name;
  MetricValues values;
};

struct MetricReport {
  std::vector<ImageMetrics> images;  // sorted by name
  MetricValues mean;
};

inline constexpr double kDiceThreshold = 0.5;
inline constexpr double kEps = 2.220446049250313e-16;

// All measures take a prediction in [0, 1] and a binary ground truth on the
// same grid, either rank 2 (H, W) or rank 4 (1, 1, H, W).

double mae(const Tensor& pred, const Tensor& gt);

struct DiceIou {
  double dic = 0.0;
  double iou = 0.0;
};
/// Binarizes pred at `threshold` (pred >= threshold). Two empty masks score 1.
DiceIou dice_iou(const Tensor& pred, const Tensor& gt, double threshold = kDiceThreshold);

/// Weighted F-measure (beta^2 = 1) with a 7x7, sigma = 5 Gaussian error
/// spread, nearest-foreground error propagation and 2 - exp(ln(0.5)/5 d)
/// background weighting. Gaussian filtering replicates the border.
double weighted_fmeasure(const Tensor& pred, const Tensor& gt);

/// Structure measure: 0.5 object-level + 0.5 region-level (four quadrants
/// split at the ground-truth centroid).
double s_measure(const Tensor& pred, const Tensor& gt);

/// Enhanced-alignment measure of pred binarized at min(2 mean(pred), 1).
double e_measure(const Tensor& pred, const Tensor& gt);

/// `threshold` applies to dic and iou only.
MetricValues evaluate(const Tensor& pred, const Tensor& gt, double threshold = kDiceThreshold);

/// Matches files by name across the two directories and evaluates every
/// pair. Predictions are read as grayscale in [0, 1]; ground truth is
/// binarized at 0.5.
MetricReport evaluate_dir(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                          double threshold = kDiceThreshold);

MetricValues mean_of(const std::vector<ImageMetrics>& images);

/// "<name> <dic> <iou> <fwb> <sm> <em> <mae>\n", six decimals.
std::string format_record(const ImageMetrics& m);
void write_records(std::ostream& os, const MetricReport& report);
void write_table(std::ostream& os, const MetricReport& report);

}  // namespace asg::metrics
