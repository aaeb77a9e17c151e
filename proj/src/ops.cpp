#include "asgnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "asgnet/error.hpp"

namespace asg {
namespace {

void require_rank4(const Tensor& x, const char* op) {
  if (x.rank() != 4) {
    throw ShapeError(std::string(op) + ": expected rank-4 NCHW input, got " +
                     shape_string(x.dims()));
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.dims()) + " vs " +
                     shape_string(b.dims()));
  }
}

void require_channel_params(const Tensor& t, int channels, const std::string& what) {
  if (t.rank() != 1 || t.dim(0) != channels) {
    throw ShapeError(what + " must have shape (" + std::to_string(channels) + "), got " +
                     shape_string(t.dims()));
  }
}

}  // namespace

std::vector<int> ConvSpec::kernel_dims() const {
  return {out_channels, depthwise ? 1 : in_channels, kernel, kernel};
}

void ConvSpec::validate() const {
  if (in_channels < 1 || out_channels < 1) throw ShapeError("conv channels must be >= 1");
  if (kernel != 1 && kernel != 3 && kernel != 5) {
    throw ShapeError("conv kernel must be 1, 3 or 5, got " + std::to_string(kernel));
  }
  if (dilation < 1) throw ShapeError("conv dilation must be >= 1");
  if (stride < 1) throw ShapeError("conv stride must be >= 1");
  if (depthwise && in_channels != out_channels) {
    throw ShapeError("depthwise conv needs in_channels == out_channels");
  }
}

NormParams NormParams::identity(std::string name, int channels) {
  return {std::move(name), Tensor({channels}, 1.0f), Tensor({channels}, 0.0f)};
}

Tensor ConvLayer::operator()(const Tensor& x) const { return conv2d(x, spec, params); }

ConvLayer ConvLayer::select_inputs(const std::vector<std::pair<int, int>>& ranges) const {
  if (spec.depthwise) throw ShapeError(params.name + ": cannot select inputs of a depthwise conv");
  int kept = 0;
  for (auto [b, e] : ranges) {
    if (b < 0 || e > spec.in_channels || b >= e) {
      throw ShapeError(params.name + ": bad input-channel range");
    }
    kept += e - b;
  }
  ConvLayer out{spec, {params.name, Tensor(), params.bias}};
  out.spec.in_channels = kept;
  out.params.kernel = Tensor(out.spec.kernel_dims());
  const std::size_t taps = static_cast<std::size_t>(spec.kernel) * spec.kernel;
  const auto src = params.kernel.data();
  auto dst = out.params.kernel.data();
  for (int o = 0; o < spec.out_channels; ++o) {
    int j = 0;
    for (auto [b, e] : ranges) {
      for (int i = b; i < e; ++i, ++j) {
        std::copy_n(src.begin() + (static_cast<std::size_t>(o) * spec.in_channels + i) * taps, taps,
                    dst.begin() + (static_cast<std::size_t>(o) * kept + j) * taps);
      }
    }
  }
  return out;
}

Tensor conv2d(const Tensor& x, const ConvSpec& spec, const LayerParams& p) {
  spec.validate();
  require_rank4(x, "conv2d");
  if (x.c() != spec.in_channels) {
    throw ShapeError("conv2d '" + p.name + "': input channels C=" + std::to_string(x.c()) +
                     " but spec expects " + std::to_string(spec.in_channels));
  }
  if (p.kernel.dims() != spec.kernel_dims()) {
    throw ShapeError("conv2d '" + p.name + "': kernel " + shape_string(p.kernel.dims()) +
                     " does not match " + shape_string(spec.kernel_dims()));
  }
  require_channel_params(p.bias, spec.out_channels, "conv2d '" + p.name + "' bias");

  const int n_batch = x.n(), in_h = x.h(), in_w = x.w();
  const int k = spec.kernel, d = spec.dilation, s = spec.stride, pad = spec.padding();
  const int out_h = (in_h + 2 * pad - d * (k - 1) - 1) / s + 1;
  const int out_w = (in_w + 2 * pad - d * (k - 1) - 1) / s + 1;
  const int in_per_out = spec.depthwise ? 1 : spec.in_channels;

  Tensor out({n_batch, spec.out_channels, out_h, out_w});
  std::vector<double> acc(static_cast<std::size_t>(out_h) * out_w);
  const auto kernel = p.kernel.data();

  for (int n = 0; n < n_batch; ++n) {
    for (int o = 0; o < spec.out_channels; ++o) {
      std::fill(acc.begin(), acc.end(), static_cast<double>(p.bias[o]));
      for (int j = 0; j < in_per_out; ++j) {
        const int ic = spec.depthwise ? o : j;
        const float* src = x.plane_ptr(n, ic);
        const float* kw = kernel.data() + (static_cast<std::size_t>(o) * in_per_out + j) * k * k;
        for (int ky = 0; ky < k; ++ky) {
          const int dy = ky * d - pad;
          for (int kx = 0; kx < k; ++kx) {
            const double wv = kw[ky * k + kx];
            if (wv == 0.0) continue;
            const int dx = kx * d - pad;
            const int ox_begin = dx < 0 ? (-dx + s - 1) / s : 0;
            const int ox_end = (in_w - 1 - dx) < 0 ? 0 : std::min(out_w, (in_w - 1 - dx) / s + 1);
            for (int oy = 0; oy < out_h; ++oy) {
              const int iy = oy * s + dy;
              if (iy < 0 || iy >= in_h) continue;
              const float* row = src + static_cast<std::size_t>(iy) * in_w;
              double* dst = acc.data() + static_cast<std::size_t>(oy) * out_w;
              if (s == 1) {
                for (int ox = ox_begin; ox < ox_end; ++ox) dst[ox] += wv * row[ox + dx];
              } else {
                for (int ox = ox_begin; ox < ox_end; ++ox) dst[ox] += wv * row[ox * s + dx];
              }
            }
          }
        }
      }
      float* dst = out.plane_ptr(n, o);
      for (std::size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<float>(acc[i]);
    }
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul: operands must be rank 2");
  const int m = a.dim(0), kk = a.dim(1), n = b.dim(1);
  if (b.dim(0) != kk) {
    throw ShapeError("matmul: inner dims differ, " + shape_string(a.dims()) + " x " +
                     shape_string(b.dims()));
  }
  Tensor out({m, n});
  std::vector<double> acc(static_cast<std::size_t>(n));
  for (int i = 0; i < m; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int k = 0; k < kk; ++k) {
      const double av = a.at(i, k);
      const float* brow = b.data().data() + static_cast<std::size_t>(k) * n;
      for (int j = 0; j < n; ++j) acc[j] += av * brow[j];
    }
    for (int j = 0; j < n; ++j) out.at(i, j) = static_cast<float>(acc[j]);
  }
  return out;
}

Tensor transpose2d(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose2d: operand must be rank 2");
  Tensor out({a.dim(1), a.dim(0)});
  for (int i = 0; i < a.dim(0); ++i)
    for (int j = 0; j < a.dim(1); ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("softmax_rows: operand must be rank 2");
  const int rows = x.dim(0), cols = x.dim(1);
  Tensor out(x.dims());
  std::vector<double> e(static_cast<std::size_t>(cols));
  for (int r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < cols; ++c) mx = std::max(mx, static_cast<double>(x.at(r, c)));
    double sum = 0.0;
    for (int c = 0; c < cols; ++c) {
      e[c] = std::exp(static_cast<double>(x.at(r, c)) - mx);
      sum += e[c];
    }
    for (int c = 0; c < cols; ++c) out.at(r, c) = static_cast<float>(e[c] / sum);
  }
  return out;
}

Tensor global_pool(const Tensor& x, PoolMode mode) {
  require_rank4(x, "global_pool");
  Tensor out({x.n(), x.c(), 1, 1});
  const std::size_t hw = x.plane();
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const float* src = x.plane_ptr(n, c);
      if (mode == PoolMode::kAvg) {
        double sum = 0.0;
        for (std::size_t i = 0; i < hw; ++i) sum += src[i];
        out.at(n, c, 0, 0) = static_cast<float>(sum / static_cast<double>(hw));
      } else {
        out.at(n, c, 0, 0) = *std::max_element(src, src + hw);
      }
    }
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const NormParams& p) {
  require_rank4(x, "layer_norm");
  const int channels = x.c();
  require_channel_params(p.scale, channels, "layer_norm '" + p.name + "' scale");
  require_channel_params(p.shift, channels, "layer_norm '" + p.name + "' shift");
  Tensor out(x.dims());
  const std::size_t hw = x.plane();
  for (int n = 0; n < x.n(); ++n) {
    for (std::size_t i = 0; i < hw; ++i) {
      double mean = 0.0;
      for (int c = 0; c < channels; ++c) mean += x.plane_ptr(n, c)[i];
      mean /= channels;
      double var = 0.0;
      for (int c = 0; c < channels; ++c) {
        const double dv = x.plane_ptr(n, c)[i] - mean;
        var += dv * dv;
      }
      var /= channels;
      const double inv = 1.0 / std::sqrt(var + kNormEps);
      for (int c = 0; c < channels; ++c) {
        const double z = (x.plane_ptr(n, c)[i] - mean) * inv;
        out.plane_ptr(n, c)[i] = static_cast<float>(z * p.scale[c] + p.shift[c]);
      }
    }
  }
  return out;
}

Tensor batch_norm_act(const Tensor& x, const NormParams& p) {
  require_rank4(x, "batch_norm_act");
  const int channels = x.c();
  require_channel_params(p.scale, channels, "batch_norm '" + p.name + "' scale");
  require_channel_params(p.shift, channels, "batch_norm '" + p.name + "' shift");
  Tensor out(x.dims());
  const std::size_t hw = x.plane();
  const double count = static_cast<double>(hw) * x.n();
  for (int c = 0; c < channels; ++c) {
    double mean = 0.0;
    for (int n = 0; n < x.n(); ++n) {
      const float* src = x.plane_ptr(n, c);
      for (std::size_t i = 0; i < hw; ++i) mean += src[i];
    }
    mean /= count;
    double var = 0.0;
    for (int n = 0; n < x.n(); ++n) {
      const float* src = x.plane_ptr(n, c);
      for (std::size_t i = 0; i < hw; ++i) var += (src[i] - mean) * (src[i] - mean);
    }
    var /= count;
    const double inv = 1.0 / std::sqrt(var + kNormEps);
    const double scale = p.scale[c], shift = p.shift[c];
    for (int n = 0; n < x.n(); ++n) {
      const float* src = x.plane_ptr(n, c);
      float* dst = out.plane_ptr(n, c);
      for (std::size_t i = 0; i < hw; ++i) {
        const double v = (src[i] - mean) * inv * scale + shift;
        dst[i] = static_cast<float>(std::max(v, 0.0));
      }
    }
  }
  return out;
}

float activate(float v, Activation kind) {
  const double x = v;
  switch (kind) {
    case Activation::kRelu:
      return v > 0.0f ? v : 0.0f;
    case Activation::kSigmoid:
      return static_cast<float>(x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                         : std::exp(x) / (1.0 + std::exp(x)));
    case Activation::kGelu: {
      const double c = std::sqrt(2.0 / std::numbers::pi);
      return static_cast<float>(0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x))));
    }
  }
  return v;
}

Tensor activate(const Tensor& x, Activation kind) {
  Tensor out = x;
  for (float& v : out.data()) v = activate(v, kind);
  return out;
}

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
  require_rank4(x, "resize_bilinear");
  if (out_h < 1 || out_w < 1) throw ShapeError("resize_bilinear: output size must be >= 1");
  const int in_h = x.h(), in_w = x.w();
  if (in_h == out_h && in_w == out_w) return x;

  struct Tap {
    int i0, i1;
    double frac;
  };
  auto taps = [](int in, int out) {
    std::vector<Tap> t(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      const double src = std::max((o + 0.5) * scale - 0.5, 0.0);
      const int i0 = std::min(static_cast<int>(src), in - 1);
      t[o] = {i0, std::min(i0 + 1, in - 1), src - i0};
    }
    return t;
  };
  const auto ty = taps(in_h, out_h);
  const auto tx = taps(in_w, out_w);

  Tensor out({x.n(), x.c(), out_h, out_w});
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const float* src = x.plane_ptr(n, c);
      float* dst = out.plane_ptr(n, c);
      for (int oy = 0; oy < out_h; ++oy) {
        const float* r0 = src + static_cast<std::size_t>(ty[oy].i0) * in_w;
        const float* r1 = src + static_cast<std::size_t>(ty[oy].i1) * in_w;
        const double fy = ty[oy].frac;
        for (int ox = 0; ox < out_w; ++ox) {
          const auto [x0, x1, fx] = tx[ox];
          const double top = r0[x0] + (r0[x1] - static_cast<double>(r0[x0])) * fx;
          const double bot = r1[x0] + (r1[x1] - static_cast<double>(r1[x0])) * fx;
          dst[static_cast<std::size_t>(oy) * out_w + ox] = static_cast<float>(top + (bot - top) * fy);
        }
      }
    }
  }
  return out;
}

Tensor concat_channels(const TensorRefs& xs) {
  if (xs.empty()) throw ShapeError("concat_channels: no inputs");
  const Tensor& first = xs.front();
  require_rank4(first, "concat_channels");
  int channels = 0;
  for (const Tensor& t : xs) {
    require_rank4(t, "concat_channels");
    if (t.n() != first.n() || t.h() != first.h() || t.w() != first.w()) {
      throw ShapeError("concat_channels: spatial mismatch " + shape_string(first.dims()) + " vs " +
                       shape_string(t.dims()));
    }
    channels += t.c();
  }
  Tensor out({first.n(), channels, first.h(), first.w()});
  const std::size_t hw = first.plane();
  for (int n = 0; n < first.n(); ++n) {
    int c0 = 0;
    for (const Tensor& t : xs) {
      std::copy_n(t.plane_ptr(n, 0), hw * t.c(), out.plane_ptr(n, c0));
      c0 += t.c();
    }
  }
  return out;
}

Tensor slice_channels(const Tensor& x, int begin, int count) {
  require_rank4(x, "slice_channels");
  if (begin < 0 || count < 1 || begin + count > x.c()) {
    throw ShapeError("slice_channels: range out of bounds for " + shape_string(x.dims()));
  }
  Tensor out({x.n(), count, x.h(), x.w()});
  for (int n = 0; n < x.n(); ++n) {
    std::copy_n(x.plane_ptr(n, begin), x.plane() * count, out.plane_ptr(n, 0));
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  Tensor out = a;
  auto o = out.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return out;
}

Tensor multiply(const Tensor& a, const Tensor& b) {
  require_same(a, b, "multiply");
  Tensor out = a;
  auto o = out.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return out;
}

Tensor scale_channels(const Tensor& x, const Tensor& gate) {
  require_rank4(x, "scale_channels");
  if (gate.dims() != std::vector<int>{x.n(), x.c(), 1, 1}) {
    throw ShapeError("scale_channels: gate " + shape_string(gate.dims()) + " for input " +
                     shape_string(x.dims()));
  }
  Tensor out = x;
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const float g = gate.at(n, c, 0, 0);
      float* p = out.plane_ptr(n, c);
      for (std::size_t i = 0; i < x.plane(); ++i) p[i] *= g;
    }
  }
  return out;
}

Tensor scale_spatial(const Tensor& x, const Tensor& gate) {
  require_rank4(x, "scale_spatial");
  if (gate.dims() != std::vector<int>{x.n(), 1, x.h(), x.w()}) {
    throw ShapeError("scale_spatial: gate " + shape_string(gate.dims()) + " for input " +
                     shape_string(x.dims()));
  }
  Tensor out = x;
  for (int n = 0; n < x.n(); ++n) {
    const float* g = gate.plane_ptr(n, 0);
    for (int c = 0; c < x.c(); ++c) {
      float* p = out.plane_ptr(n, c);
      for (std::size_t i = 0; i < x.plane(); ++i) p[i] *= g[i];
    }
  }
  return out;
}

Tensor broadcast_spatial(const Tensor& x, int h, int w) {
  require_rank4(x, "broadcast_spatial");
  if (x.h() != 1 || x.w() != 1) throw ShapeError("broadcast_spatial: input must be (N, C, 1, 1)");
  Tensor out({x.n(), x.c(), h, w});
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      float* p = out.plane_ptr(n, c);
      std::fill(p, p + out.plane(), x.at(n, c, 0, 0));
    }
  }
  return out;
}

Tensor broadcast_channels(const Tensor& x, int channels) {
  require_rank4(x, "broadcast_channels");
  if (x.c() != 1) throw ShapeError("broadcast_channels: input must have one channel");
  Tensor out({x.n(), channels, x.h(), x.w()});
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < channels; ++c) std::copy_n(x.plane_ptr(n, 0), x.plane(), out.plane_ptr(n, c));
  }
  return out;
}

}  // namespace asg
