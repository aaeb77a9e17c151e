#include "asgnet/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <random>

#include "asgnet/distance_transform.hpp"
#include "asgnet/error.hpp"
#include "asgnet/io.hpp"
#include "asgnet/metrics.hpp"
#include "asgnet/network.hpp"
#include "asgnet/spectral.hpp"
#include "asgnet/supervision.hpp"

namespace asg {
namespace {

Tensor random_tensor(std::vector<int> dims, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(dims));
  for (float& v : t.data()) v = static_cast<float>(u(rng));
  return t;
}

Tensor random_mask(std::vector<int> dims, std::mt19937_64& rng) {
  std::bernoulli_distribution b(0.5);
  Tensor t(std::move(dims));
  for (float& v : t.data()) v = b(rng) ? 1.0f : 0.0f;
  return t;
}

std::string fmt(const char* pattern, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

// Soft blob: bright disc on a dark ramp, used as a forward input.
Tensor blob_image(int size) {
  Tensor img({1, 3, size, size});
  const double r = size / 4.0, c = size / 2.0;
  for (int ch = 0; ch < 3; ++ch) {
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const bool inside = (y - c) * (y - c) + (x - c) * (x - c) <= r * r;
        img.at(0, ch, y, x) = static_cast<float>(inside ? 0.8 : 0.1 + 0.2 * x / size + 0.05 * ch);
      }
    }
  }
  return img;
}

class Battery {
 public:
  Battery(SelfCheckReport& report, const std::function<void(const CheckOutcome&)>& progress)
      : report_(report), progress_(progress) {}

  template <class F>
  void run(const std::string& name, F&& body) {
    CheckOutcome o{name, false, {}};
    try {
      std::string detail;
      o.passed = body(detail);
      o.detail = std::move(detail);
    } catch (const std::exception& e) {
      o.passed = false;
      o.detail = std::string("exception: ") + e.what();
    }
    report_.checks.push_back(o);
    if (progress_) progress_(o);
  }

 private:
  SelfCheckReport& report_;
  const std::function<void(const CheckOutcome&)>& progress_;
};

}  // namespace

int SelfCheckReport::passed() const {
  return static_cast<int>(std::count_if(checks.begin(), checks.end(), [](const auto& c) { return c.passed; }));
}

int SelfCheckReport::failed() const { return static_cast<int>(checks.size()) - passed(); }

std::vector<GradCheckSummary> run_gradcheck(int trials, std::uint64_t seed) {
  if (trials < 1) throw ValidationError("gradcheck: trials must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<GradCheckSummary> out{{"weighted_bce", trials}, {"weighted_iou", trials}, {"dice", trials}};
  for (int t = 0; t < trials; ++t) {
    const Tensor logits = random_tensor({1, 1, 4, 4}, rng, -3.0, 3.0);
    const Tensor gt = random_mask({1, 1, 4, 4}, rng);
    const PixelWeights w = PixelWeights::from_mask(gt);
    const GradCheckResult r[3] = {
        check_gradient([&](const Tensor& z) { return weighted_bce(z, gt, w); }, logits),
        check_gradient([&](const Tensor& z) { return weighted_iou(z, gt, w); }, logits),
        check_gradient([&](const Tensor& z) { return dice_loss(z, gt); }, logits),
    };
    for (int k = 0; k < 3; ++k) {
      out[k].max_rel_error = std::max(out[k].max_rel_error, r[k].max_rel_error);
      out[k].max_abs_error = std::max(out[k].max_abs_error, r[k].max_abs_error);
    }
  }
  return out;
}

SelfCheckReport run_selfcheck(std::uint64_t seed, const std::function<void(const CheckOutcome&)>& progress) {
  SelfCheckReport report;
  Battery b(report, progress);
  std::mt19937_64 rng(seed);

  b.run("fft round trip", [&](std::string& d) {
    double worst = 0.0;
    for (int size : {8, 11, 16, 22}) {
      const Tensor x = random_tensor({1, 2, size, size}, rng, -0.5, 0.5);
      const ComplexTensor back = ifft2d(fft2d(x));
      worst = std::max({worst, max_abs_diff(back.re, x), max_abs_diff(back.im, Tensor(x.dims()))});
    }
    d = fmt("max abs error %.3g", worst);
    return worst < 1e-5;
  });

  b.run("fft parseval and dc term", [&](std::string& d) {
    double worst = 0.0;
    for (int size : {4, 11, 32}) {
      const Tensor x = random_tensor({1, 1, size, size}, rng, -0.5, 0.5);
      const ComplexTensor z = fft2d(x);
      double e_space = 0.0, e_freq = 0.0, sum = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        e_space += static_cast<double>(x[i]) * x[i];
        e_freq += static_cast<double>(z.re[i]) * z.re[i] + static_cast<double>(z.im[i]) * z.im[i];
        sum += x[i];
      }
      e_freq /= static_cast<double>(x.size());
      worst = std::max(worst, std::abs(e_space - e_freq) / e_space);
      worst = std::max(worst, std::abs(z.re[0] - sum) / std::max(std::abs(sum), 1.0));
    }
    d = fmt("max relative error %.3g", worst);
    return worst < 1e-6;
  });

  b.run("fft radix-2 matches direct", [&](std::string& d) {
    double worst = 0.0;
    for (int size : {4, 8, 16, 32}) {
      const Tensor x = random_tensor({1, 1, size, size}, rng, -0.5, 0.5);
      const ComplexTensor a = fft2d(x, FftMethod::kDirect), r = fft2d(x, FftMethod::kRadix2);
      worst = std::max({worst, max_abs_diff(a.re, r.re), max_abs_diff(a.im, r.im)});
    }
    d = fmt("max abs difference %.3g", worst);
    return worst < 1e-5;
  });

  b.run("attention single channel passes V through", [&](std::string& d) {
    ParamInit init(seed);
    AttentionParams p;
    p.ln = init.norm("ln", 1);
    for (int i = 0; i < 3; ++i) {
      p.proj[i] = init.pointwise("proj" + std::to_string(i), 1, 1);
      p.dw[i] = init.depthwise("dw" + std::to_string(i), 1, 3);
    }
    const Tensor x = random_tensor({1, 1, 6, 5}, rng, -1.0, 1.0);
    const Tensor v = p.dw[2](p.proj[2](layer_norm(x, p.ln)));
    const AttentionOutput out = snp_attention(x, p);
    d = fmt("max abs difference %.3g", max_abs_diff(out.features, v));
    return out.features == v && out.attention.size() == 1 && out.attention[0] == 1.0f;
  });

  b.run("loss gradients match finite differences", [&](std::string& d) {
    bool ok = true;
    for (const auto& g : run_gradcheck(5, seed)) {
      d += g.loss + fmt(" %.3g ", g.max_rel_error);
      ok = ok && g.passed();
    }
    return ok;
  });

  b.run("perfect prediction scores", [&](std::string& d) {
    const Tensor gt = random_mask({1, 1, 12, 12}, rng);
    const metrics::MetricValues m = metrics::evaluate(gt, gt);
    const double err = std::max({std::abs(m.dic - 1), std::abs(m.iou - 1), std::abs(m.fwb - 1),
                                 std::abs(m.sm - 1), std::abs(m.em - 1), std::abs(m.mae)});
    d = fmt("max deviation %.3g", err);
    return err <= 1e-6;
  });

  b.run("metrics stay in range", [&](std::string& d) {
    for (int t = 0; t < 5; ++t) {
      const Tensor pred = random_tensor({1, 1, 10, 9}, rng, 0.0, 1.0);
      const Tensor gt = random_mask({1, 1, 10, 9}, rng);
      const metrics::MetricValues m = metrics::evaluate(pred, gt);
      for (double v : {m.dic, m.iou, m.fwb, m.sm, m.em, m.mae}) {
        if (!(v >= 0.0 && v <= 1.0)) {
          d = fmt("value %.6f out of [0, 1]", v);
          return false;
        }
      }
    }
    return true;
  });

  b.run("distance transform matches brute force", [&](std::string& d) {
    const int h = 9, w = 7;
    std::bernoulli_distribution sparse(0.15);
    std::vector<std::uint8_t> mask(h * w);
    for (auto& m : mask) m = sparse(rng) ? 1 : 0;
    mask[20] = 1;
    const DistanceField f = distance_to_foreground(mask, h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        long best = -1;
        for (int i = 0; i < h * w; ++i) {
          if (!mask[i]) continue;
          const long dy = i / w - y, dx = i % w - x, dd = dy * dy + dx * dx;
          if (best < 0 || dd < best) best = dd;
        }
        if (std::abs(f.distance[y * w + x] - std::sqrt(static_cast<double>(best))) > 1e-12) {
          d = "mismatch at " + std::to_string(y) + "," + std::to_string(x);
          return false;
        }
      }
    }
    return true;
  });

  b.run("file formats round trip", [&](std::string& d) {
    const Tensor t = random_tensor({2, 3, 4, 5}, rng, -10.0, 10.0);
    std::size_t off = 0;
    const auto bytes = encode_tensor(t);
    if (!(decode_tensor(bytes, off) == t) || off != bytes.size()) {
      d = "tensor record";
      return false;
    }
    const Tensor img = random_tensor({1, 3, 5, 4}, rng, 0.0, 1.0);
    const Tensor back = decode_image(encode_image(img));
    if (max_abs_diff(back, img) > 1.0 / 510.0 + 1e-7 || !(decode_image(encode_image(back)) == back)) {
      d = "image";
      return false;
    }
    EncoderConfig cfg = EncoderConfig::desk(64);
    cfg.width = 16;
    const AsgNetParams p = init_params(cfg, seed);
    AsgNetParams q = init_params(cfg, seed + 1);
    decode_weights(q, encode_weights(p));
    if (encode_weights(q) != encode_weights(p)) {
      d = "weights";
      return false;
    }
    return true;
  });

  EncoderConfig small = EncoderConfig::desk(64);
  small.width = 16;
  const AsgNetParams net = init_params(small, seed);
  const Tensor image = blob_image(64);

  b.run("forward shape contract", [&](std::string& d) {
    Trace trace;
    const StagePyramid pyr = forward(image, net, {}, &trace);
    for (int stage = 2; stage <= 5; ++stage) {
      const int slot = stage_slot(stage), side = 64 >> stage;
      const auto& e = pyr.encoder[slot];
      const auto& s = pyr.snp[slot];
      const auto& p = pyr.pred[slot];
      if (e.h() != side || e.w() != side || s.h() != side || s.c() != small.width || p.h() != side ||
          p.c() != 1) {
        d = "stage " + std::to_string(stage) + " has wrong extents";
        return false;
      }
    }
    if (pyr.mask.h() != 64 || pyr.mask.w() != 64 || pyr.mask.c() != 1 || pyr.semantic.c() != 1) {
      d = "mask or semantic map has wrong extents";
      return false;
    }
    for (const auto& [name, t] : pyr.named()) {
      if (!t->all_finite()) {
        d = name + " is not finite";
        return false;
      }
    }
    return pyr.mask.min() >= 0.0f && pyr.mask.max() <= 1.0f;
  });

  b.run("attention maps are row-stochastic", [&](std::string& d) {
    Trace trace;
    forward(image, net, {}, &trace);
    double worst = 0.0;
    for (const Tensor& a : trace.attention) {
      const int c = a.dim(1);
      for (int r = 0; r < a.dim(0) * c; ++r) {
        double sum = 0.0;
        for (int k = 0; k < c; ++k) {
          const float v = a[static_cast<std::size_t>(r) * c + k];
          if (v < 0.0f) return false;
          sum += v;
        }
        worst = std::max(worst, std::abs(sum - 1.0));
      }
    }
    d = fmt("max row-sum error %.3g", worst);
    return worst <= 1e-6;
  });

  b.run("ablation flags are reachable and exclusive", [&](std::string& d) {
    const StagePyramid base = forward(image, net);
    const char* names[] = {"asf_in_snp", "asf_in_mse", "asf_in_dci", "edge_branch", "reverse_attention"};
    for (int k = 0; k < 5; ++k) {
      AblationFlags flags;
      bool* field[] = {&flags.asf_in_snp, &flags.asf_in_mse, &flags.asf_in_dci, &flags.edge_branch,
                       &flags.reverse_attention};
      *field[k] = false;
      Trace trace;
      const StagePyramid pyr = forward(image, net, flags, &trace);
      const int counters[] = {trace.asf_snp_calls, trace.asf_mse_calls, trace.asf_dci_calls, trace.edge_calls,
                              trace.reverse_calls};
      if (counters[k] != 0 || pyr.pred[0] == base.pred[0]) {
        d = std::string(names[k]) + (counters[k] != 0 ? " still invoked" : " has no effect");
        return false;
      }
    }
    return true;
  });

  b.run("forward is deterministic", [&](std::string& d) {
    const StagePyramid a = forward(image, net), c = forward(image, net);
    const auto na = a.named(), nc = c.named();
    for (std::size_t i = 0; i < na.size(); ++i) {
      if (!(*na[i].second == *nc[i].second)) {
        d = na[i].first + " differs";
        return false;
      }
    }
    return true;
  });

  return report;
}

}  // namespace asg
