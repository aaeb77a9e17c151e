#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "asgnet/tensor.hpp"

namespace testing {

inline asg::Tensor random_tensor(std::vector<int> dims, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  asg::Tensor t(std::move(dims));
  for (float& v : t.data()) v = static_cast<float>(u(rng));
  return t;
}

inline asg::Tensor random_mask(std::vector<int> dims, std::mt19937_64& rng, double p = 0.5) {
  std::bernoulli_distribution b(p);
  asg::Tensor t(std::move(dims));
  for (float& v : t.data()) v = b(rng) ? 1.0f : 0.0f;
  return t;
}

inline double max_abs_diff(const asg::Tensor& a, const asg::Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

/// ||a - b||_F / max(||b||_F, tiny).
inline double rel_frobenius(const asg::Tensor& a, const asg::Tensor& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    num += d * d;
    den += static_cast<double>(b[i]) * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-30);
}

/// Disc of radius r centred in an h x w (1, 1, h, w) mask.
inline asg::Tensor disc_mask(int h, int w, double r) {
  asg::Tensor m({1, 1, h, w});
  const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m.at(0, 0, y, x) = (y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r ? 1.0f : 0.0f;
  }
  return m;
}

/// Rotates every plane of a rank-4 tensor by 90 degrees counter-clockwise.
inline asg::Tensor rot90(const asg::Tensor& t) {
  asg::Tensor out({t.n(), t.c(), t.w(), t.h()});
  for (int n = 0; n < t.n(); ++n) {
    for (int c = 0; c < t.c(); ++c) {
      for (int y = 0; y < t.h(); ++y) {
        for (int x = 0; x < t.w(); ++x) out.at(n, c, t.w() - 1 - x, y) = t.at(n, c, y, x);
      }
    }
  }
  return out;
}

inline asg::Tensor transpose_planes(const asg::Tensor& t) {
  asg::Tensor out({t.n(), t.c(), t.w(), t.h()});
  for (int n = 0; n < t.n(); ++n) {
    for (int c = 0; c < t.c(); ++c) {
      for (int y = 0; y < t.h(); ++y) {
        for (int x = 0; x < t.w(); ++x) out.at(n, c, x, y) = t.at(n, c, y, x);
      }
    }
  }
  return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("asgnet_test_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace testing

