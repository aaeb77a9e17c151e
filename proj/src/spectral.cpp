#include "asgnet/spectral.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "asgnet/error.hpp"

namespace asg {
namespace {

using cplx = std::complex<double>;

// 1-D transforms of length L applied in place to a strided sequence.
class Transform1d {
 public:
  Transform1d(int length, bool inverse, FftMethod method)
      : length_(length), method_(method), twiddle_(static_cast<std::size_t>(length)),
        scratch_(static_cast<std::size_t>(length)) {
    const double sign = inverse ? 1.0 : -1.0;
    for (int k = 0; k < length; ++k) {
      twiddle_[k] = std::polar(1.0, sign * 2.0 * std::numbers::pi * k / length);
    }
    if (method == FftMethod::kRadix2) {
      if (!is_power_of_two(length)) {
        throw ShapeError("radix-2 FFT needs a power-of-two extent, got " + std::to_string(length));
      }
      reversed_.resize(static_cast<std::size_t>(length));
      int bits = 0;
      while ((1 << bits) < length) ++bits;
      for (int i = 0; i < length; ++i) {
        int r = 0;
        for (int b = 0; b < bits; ++b) r |= ((i >> b) & 1) << (bits - 1 - b);
        reversed_[i] = r;
      }
    }
  }

  void operator()(cplx* data, std::size_t stride) {
    for (int i = 0; i < length_; ++i) scratch_[i] = data[i * stride];
    if (method_ == FftMethod::kDirect) {
      direct(data, stride);
    } else {
      radix2(data, stride);
    }
  }

 private:
  void direct(cplx* data, std::size_t stride) const {
    for (int u = 0; u < length_; ++u) {
      cplx acc{0.0, 0.0};
      std::size_t idx = 0;
      for (int t = 0; t < length_; ++t) {
        acc += scratch_[t] * twiddle_[idx];
        idx += static_cast<std::size_t>(u);
        if (idx >= static_cast<std::size_t>(length_)) idx -= length_;
      }
      data[u * stride] = acc;
    }
  }

  void radix2(cplx* data, std::size_t stride) {
    std::vector<cplx>& a = scratch_;
    for (int i = 0; i < length_; ++i) {
      if (i < reversed_[i]) std::swap(a[i], a[reversed_[i]]);
    }
    for (int len = 2; len <= length_; len <<= 1) {
      const int half = len / 2, step = length_ / len;
      for (int start = 0; start < length_; start += len) {
        for (int j = 0; j < half; ++j) {
          const cplx t = a[start + j + half] * twiddle_[j * step];
          a[start + j + half] = a[start + j] - t;
          a[start + j] += t;
        }
      }
    }
    for (int i = 0; i < length_; ++i) data[i * stride] = a[i];
  }

  int length_;
  FftMethod method_;
  std::vector<cplx> twiddle_;
  std::vector<cplx> scratch_;
  std::vector<int> reversed_;
};

ComplexTensor transform(const Tensor& re, const Tensor* im, bool inverse, FftMethod method) {
  if (re.rank() != 4) throw ShapeError("fft2d: expected rank-4 input, got " + shape_string(re.dims()));
  if (im && !im->same_shape(re)) throw ShapeError("fft2d: re/im shapes differ");
  const int h = re.h(), w = re.w();
  Transform1d along_w(w, inverse, method);
  Transform1d along_h(h, inverse, method);
  const double scale = inverse ? 1.0 / (static_cast<double>(w) * h) : 1.0;

  ComplexTensor out{Tensor(re.dims()), Tensor(re.dims())};
  std::vector<cplx> buf(re.plane());
  for (int n = 0; n < re.n(); ++n) {
    for (int c = 0; c < re.c(); ++c) {
      const float* pr = re.plane_ptr(n, c);
      const float* pi = im ? im->plane_ptr(n, c) : nullptr;
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = {pr[i], pi ? pi[i] : 0.0};
      for (int y = 0; y < h; ++y) along_w(buf.data() + static_cast<std::size_t>(y) * w, 1);
      for (int x = 0; x < w; ++x) along_h(buf.data() + x, static_cast<std::size_t>(w));
      float* orp = out.re.plane_ptr(n, c);
      float* oip = out.im.plane_ptr(n, c);
      for (std::size_t i = 0; i < buf.size(); ++i) {
        orp[i] = static_cast<float>(buf[i].real() * scale);
        oip[i] = static_cast<float>(buf[i].imag() * scale);
      }
    }
  }
  return out;
}

}  // namespace

ComplexTensor::ComplexTensor(Tensor re_part, Tensor im_part)
    : re(std::move(re_part)), im(std::move(im_part)) {
  if (!re.same_shape(im)) {
    throw ShapeError("complex tensor parts differ: " + shape_string(re.dims()) + " vs " +
                     shape_string(im.dims()));
  }
}

ComplexTensor::ComplexTensor(const Tensor& real_only) : re(real_only), im(real_only.dims()) {}

bool is_power_of_two(int v) noexcept { return v > 0 && (v & (v - 1)) == 0; }

ComplexTensor fft2d(const Tensor& x, FftMethod method) { return transform(x, nullptr, false, method); }

ComplexTensor fft2d(const ComplexTensor& x, FftMethod method) {
  return transform(x.re, &x.im, false, method);
}

ComplexTensor ifft2d(const ComplexTensor& spectrum, FftMethod method) {
  return transform(spectrum.re, &spectrum.im, true, method);
}

Tensor modulus(const ComplexTensor& z) {
  Tensor out(z.re.dims());
  const auto re = z.re.data();
  const auto im = z.im.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = static_cast<float>(std::hypot(static_cast<double>(re[i]), static_cast<double>(im[i])));
  }
  return out;
}

Tensor msa_gate(const Tensor& x, const MsaParams& p) {
  const Tensor small = activate(p.small_gate(activate(p.small_reduce(x), Activation::kRelu)),
                                Activation::kSigmoid);
  const Tensor large = activate(p.large_gate(activate(p.large_reduce(x), Activation::kRelu)),
                                Activation::kSigmoid);
  return add(small, large);
}

Tensor msa(const Tensor& x, const MsaParams& p) {
  const Tensor small = activate(p.small_gate(activate(p.small_reduce(x), Activation::kRelu)),
                                Activation::kSigmoid);
  const Tensor large = activate(p.large_gate(activate(p.large_reduce(x), Activation::kRelu)),
                                Activation::kSigmoid);
  return add(scale_spatial(x, small), scale_spatial(x, large));
}

Tensor joint_attention_weights(const ComplexTensor& spectrum, const AsfParams& p) {
  const Tensor magnitude = modulus(spectrum);
  const Tensor pooled = add(global_pool(magnitude, PoolMode::kAvg), global_pool(magnitude, PoolMode::kMax));
  const Tensor channel = activate(p.channel_gate(pooled), Activation::kSigmoid);
  // |ca * X| = ca * |X| since the channel gate is real and non-negative.
  const Tensor spatial = msa_gate(scale_channels(magnitude, channel), p.msa);
  return scale_channels(broadcast_channels(spatial, magnitude.c()), channel);
}

ComplexTensor joint_attention(const ComplexTensor& spectrum, const AsfParams& p, bool bypass) {
  const Tensor weights = bypass ? Tensor(spectrum.dims(), 1.0f) : joint_attention_weights(spectrum, p);
  ComplexTensor out = spectrum;
  auto re = out.re.data();
  auto im = out.im.data();
  const auto wv = weights.data();
  for (std::size_t i = 0; i < re.size(); ++i) {
    re[i] = static_cast<float>(static_cast<double>(wv[i]) * re[i] + re[i]);
    im[i] = static_cast<float>(static_cast<double>(wv[i]) * im[i] + im[i]);
  }
  return out;
}

Tensor asf(const Tensor& x, const AsfParams& p, const AsfHooks& hooks, FftMethod method) {
  const Tensor normed = hooks.bypass_norms ? x : layer_norm(x, p.ln);
  const ComplexTensor spectrum = fft2d(p.proj(normed), method);
  const ComplexTensor filtered = joint_attention(spectrum, p, hooks.bypass_attention);
  const Tensor mag = modulus(ifft2d(filtered, method));
  if (hooks.bypass_norms) return activate(mag, Activation::kRelu);
  return batch_norm_act(mag, p.bn);
}

}  // namespace asg
