#include "asgnet/distance_transform.hpp"

#include <cmath>
#include <limits>

#include "asgnet/error.hpp"

namespace asg {
namespace {

constexpr std::int64_t kAbsent = std::numeric_limits<std::int64_t>::max();

// Breakpoint num / den with den > 0; `lowest` marks minus infinity.
struct Breakpoint {
  std::int64_t num = 0;
  std::int64_t den = 1;
  bool lowest = false;

  bool operator<=(const Breakpoint& o) const { return !o.lowest && num * o.den <= o.num * den; }
  bool less_than(std::int64_t q) const { return !lowest && num < q * den; }
};

// Lower envelope of parabolas (x - q)^2 + f[q] over the present samples.
void envelope(const std::vector<std::int64_t>& f, std::vector<std::int64_t>& d, std::vector<int>& arg,
              std::vector<int>& v, std::vector<Breakpoint>& z) {
  const int n = static_cast<int>(f.size());
  v.clear();
  z.clear();
  for (int q = 0; q < n; ++q) {
    if (f[q] == kAbsent) continue;
    const std::int64_t fq = f[q] + static_cast<std::int64_t>(q) * q;
    while (true) {
      if (v.empty()) {
        v.push_back(q);
        z.push_back({0, 1, true});
        break;
      }
      const int p = v.back();
      const Breakpoint s{fq - (f[p] + static_cast<std::int64_t>(p) * p), 2 * static_cast<std::int64_t>(q - p)};
      if (s <= z.back()) {
        v.pop_back();
        z.pop_back();
        continue;
      }
      v.push_back(q);
      z.push_back(s);
      break;
    }
  }
  if (v.empty()) {
    std::fill(d.begin(), d.end(), kAbsent);
    std::fill(arg.begin(), arg.end(), -1);
    return;
  }
  std::size_t k = 0;
  for (int q = 0; q < n; ++q) {
    while (k + 1 < v.size() && z[k + 1].less_than(q)) ++k;
    const std::int64_t dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
    arg[q] = v[k];
  }
}

}  // namespace

DistanceField distance_to_foreground(std::span<const std::uint8_t> mask, int h, int w) {
  if (h < 1 || w < 1 || mask.size() != static_cast<std::size_t>(h) * w) {
    throw ShapeError("distance transform: mask size does not match " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
  const std::size_t count = mask.size();
  std::vector<std::int64_t> col_dist(count, kAbsent);
  std::vector<int> col_row(count, -1);
  std::vector<int> v;
  std::vector<Breakpoint> z;

  std::vector<std::int64_t> f(static_cast<std::size_t>(h)), d(static_cast<std::size_t>(h));
  std::vector<int> arg(static_cast<std::size_t>(h));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = mask[static_cast<std::size_t>(y) * w + x] ? 0 : kAbsent;
    envelope(f, d, arg, v, z);
    for (int y = 0; y < h; ++y) {
      col_dist[static_cast<std::size_t>(y) * w + x] = d[y];
      col_row[static_cast<std::size_t>(y) * w + x] = arg[y];
    }
  }

  DistanceField out{h, w, std::vector<double>(count), std::vector<int>(count, -1)};
  f.assign(static_cast<std::size_t>(w), 0);
  d.assign(static_cast<std::size_t>(w), 0);
  arg.assign(static_cast<std::size_t>(w), 0);
  for (int y = 0; y < h; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) f[x] = col_dist[row + x];
    envelope(f, d, arg, v, z);
    for (int x = 0; x < w; ++x) {
      if (arg[x] < 0) {
        out.distance[row + x] = std::numeric_limits<double>::infinity();
        continue;
      }
      out.distance[row + x] = std::sqrt(static_cast<double>(d[x]));
      out.nearest[row + x] = col_row[row + arg[x]] * w + arg[x];
    }
  }
  return out;
}

}  // namespace asg
