#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "asgnet/error.hpp"
#include "asgnet/ops.hpp"
#include "asgnet/params.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace asg;
using testing::random_tensor;

namespace {

LayerParams layer(const ConvSpec& s, Tensor kernel, std::string name = "t") {
  return {std::move(name), std::move(kernel), Tensor({s.out_channels})};
}

LayerParams random_layer(const ConvSpec& s, std::mt19937_64& rng) {
  return {"r", random_tensor(s.kernel_dims(), rng), random_tensor({s.out_channels}, rng)};
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("construction validates extents and data length") {
    CHECK_THROWS_AS(Tensor({2, 0, 3}), ShapeError);
    CHECK_THROWS_AS(Tensor({1, 1, 1, 1, 1}), ShapeError);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
    const Tensor t({2, 3, 4, 5}, 1.5f);
    CHECK(t.size() == 120);
    CHECK(t.rank() == 4);
    CHECK(t.plane() == 20);
    CHECK(t.all_finite());
    CHECK(Tensor().empty());
  }

  TEST_CASE("nchw indexing is row-major with width fastest") {
    Tensor t({2, 3, 4, 5});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i);
    CHECK(t.at(1, 2, 3, 4) == 119.0f);
    CHECK(t.at(0, 1, 0, 0) == 20.0f);
    CHECK(t.at(0, 0, 1, 0) == 5.0f);
  }

  TEST_CASE("all_finite detects nan and inf") {
    Tensor t({3});
    t[1] = std::numeric_limits<float>::quiet_NaN();
    CHECK_FALSE(t.all_finite());
    t[1] = std::numeric_limits<float>::infinity();
    CHECK_FALSE(t.all_finite());
  }
}

TEST_SUITE("conv2d") {
  TEST_CASE("identity kernel returns the input") {
    const ConvSpec s{1, 1, 3, 1, 1, false};
    Tensor k({1, 1, 3, 3});
    k.at(0, 0, 1, 1) = 1.0f;
    const Tensor x({1, 1, 3, 3}, 1.0f);
    CHECK(conv2d(x, s, layer(s, k)) == x);
  }

  TEST_CASE("all-ones kernel counts in-bounds taps") {
    const ConvSpec s{1, 1, 3, 1, 1, false};
    const Tensor y = conv2d(Tensor({1, 1, 3, 3}, 1.0f), s, layer(s, Tensor({1, 1, 3, 3}, 1.0f)));
    CHECK(y.at(0, 0, 1, 1) == 9.0f);
    CHECK(y.at(0, 0, 0, 0) == 4.0f);
    CHECK(y.at(0, 0, 2, 2) == 4.0f);
    CHECK(y.at(0, 0, 0, 1) == 6.0f);
  }

  TEST_CASE("dilated conv matches nested-loop oracle") {
    std::mt19937_64 rng(1);
    const ConvSpec s{2, 3, 3, 3, 1, false};
    const Tensor x = random_tensor({1, 2, 8, 8}, rng);
    const LayerParams p = random_layer(s, rng);
    const Tensor got = conv2d(x, s, p);
    const Tensor want = oracle::conv2d(x, s, p.kernel, p.bias);
    CHECK(got.dims() == want.dims());
    CHECK(testing::max_abs_diff(got, want) <= 1e-6);
  }

  TEST_CASE("random configurations agree with the oracle to 1e-4 relative") {
    std::mt19937_64 rng(2);
    for (int kernel : {1, 3, 5}) {
      for (int dilation : {1, 2, 3}) {
        for (int stride : {1, 2}) {
          for (bool dw : {false, true}) {
            const ConvSpec s{3, dw ? 3 : 4, kernel, dilation, stride, dw};
            const Tensor x = random_tensor({2, 3, 8, 8}, rng);
            const LayerParams p = random_layer(s, rng);
            const Tensor got = conv2d(x, s, p);
            const Tensor want = oracle::conv2d(x, s, p.kernel, p.bias);
            CAPTURE(kernel);
            CAPTURE(dilation);
            CAPTURE(stride);
            CAPTURE(dw);
            REQUIRE(got.dims() == want.dims());
            CHECK(testing::rel_frobenius(got, want) <= 1e-4);
          }
        }
      }
    }
  }

  TEST_CASE("stride 1 preserves extents and stride s gives ceil(H / s)") {
    std::mt19937_64 rng(3);
    for (int kernel : {1, 3, 5}) {
      for (int dilation : {1, 2, 4}) {
        const ConvSpec s{1, 1, kernel, dilation, 1, false};
        CHECK(s.padding() * 2 == dilation * (kernel - 1));
        const Tensor y = conv2d(random_tensor({1, 1, 7, 9}, rng), s, random_layer(s, rng));
        CHECK(y.h() == 7);
        CHECK(y.w() == 9);
      }
    }
    const ConvSpec s2{1, 1, 3, 1, 2, false};
    const Tensor y = conv2d(random_tensor({1, 1, 7, 9}, rng), s2, random_layer(s2, rng));
    CHECK(y.h() == 4);
    CHECK(y.w() == 5);
  }

  TEST_CASE("depthwise output channel depends only on its own input channel") {
    std::mt19937_64 rng(4);
    const ConvSpec s = ConvSpec::depthwise_conv(4, 3);
    const LayerParams p = random_layer(s, rng);
    const Tensor x = random_tensor({1, 4, 6, 6}, rng);
    Tensor x2 = x;
    for (int y = 0; y < 6; ++y) {
      for (int xx = 0; xx < 6; ++xx) x2.at(0, 2, y, xx) += 1.0f;
    }
    const Tensor a = conv2d(x, s, p), b = conv2d(x2, s, p);
    for (int c = 0; c < 4; ++c) {
      bool same = true;
      for (int y = 0; y < 6; ++y) {
        for (int xx = 0; xx < 6; ++xx) same = same && a.at(0, c, y, xx) == b.at(0, c, y, xx);
      }
      CHECK(same == (c != 2));
    }
  }

  TEST_CASE("shape errors name the offending extent") {
    const ConvSpec s{3, 2, 3, 1, 1, false};
    std::mt19937_64 rng(5);
    const LayerParams p = random_layer(s, rng);
    try {
      conv2d(Tensor({1, 2, 4, 4}), s, p);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("channel") != std::string::npos);
    }
    CHECK_THROWS_AS(conv2d(Tensor({1, 3, 4, 4}), s, layer(s, Tensor({2, 3, 5, 5}))), ShapeError);
    CHECK_THROWS_AS(ConvSpec({2, 3, 3, 1, 1, true}).validate(), ShapeError);
    CHECK_THROWS_AS(ConvSpec({2, 3, 4, 1, 1, false}).validate(), ShapeError);
  }

  TEST_CASE("select_inputs equals zeroing the dropped channels") {
    std::mt19937_64 rng(6);
    ParamInit init(6);
    const ConvLayer full = init.pointwise("fuse", 6, 3);
    const Tensor a = random_tensor({1, 2, 4, 4}, rng), b = random_tensor({1, 2, 4, 4}, rng),
                 c = random_tensor({1, 2, 4, 4}, rng);
    const Tensor zeros({1, 2, 4, 4});
    const Tensor want = full(concat_channels({a, zeros, c}));
    const Tensor got = full.select_inputs({{0, 2}, {4, 6}})(concat_channels({a, c}));
    CHECK(got == want);
    (void)b;
  }
}

TEST_SUITE("matmul") {
  TEST_CASE("identity and a tiny product") {
    const Tensor eye({2, 2}, std::vector<float>{1, 0, 0, 1});
    const Tensor m({2, 2}, std::vector<float>{3, -1, 2, 7});
    CHECK(matmul(eye, m) == m);
    const Tensor y = matmul(Tensor({1, 2}, std::vector<float>{1, 2}), Tensor({2, 1}, std::vector<float>{3, 4}));
    CHECK(y.dims() == std::vector<int>{1, 1});
    CHECK(y[0] == 11.0f);
  }

  TEST_CASE("random products match the triple loop") {
    std::mt19937_64 rng(7);
    const Tensor a = random_tensor({5, 7}, rng), b = random_tensor({7, 3}, rng);
    CHECK(testing::max_abs_diff(matmul(a, b), oracle::matmul(a, b)) <= 1e-6);
    const Tensor c = random_tensor({8, 8}, rng), d = random_tensor({8, 8}, rng);
    CHECK(testing::rel_frobenius(matmul(c, d), oracle::matmul(c, d)) <= 1e-4);
  }

  TEST_CASE("inner dimension mismatch is an error") {
    CHECK_THROWS_AS(matmul(Tensor({2, 3}), Tensor({2, 3})), ShapeError);
  }

  TEST_CASE("transpose swaps indices") {
    std::mt19937_64 rng(8);
    const Tensor a = random_tensor({3, 5}, rng);
    const Tensor t = transpose2d(a);
    CHECK(t.dims() == std::vector<int>{5, 3});
    CHECK(t.at(4, 1) == a.at(1, 4));
  }
}

TEST_SUITE("softmax") {
  TEST_CASE("analytic rows") {
    const Tensor a = softmax_rows(Tensor({3, 2}, std::vector<float>{0, 0, 1000, 1000,
                                                                     0, static_cast<float>(std::log(3.0))}));
    CHECK(a.at(0, 0) == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(a.at(1, 0) == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(a.at(1, 1) == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(a.at(2, 0) == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(a.at(2, 1) == doctest::Approx(0.75).epsilon(1e-6));
  }

  TEST_CASE("rows are stochastic even with a spread of 1e3") {
    std::mt19937_64 rng(9);
    for (double spread : {1.0, 30.0, 1000.0}) {
      const Tensor x = random_tensor({6, 9}, rng, -spread / 2, spread / 2);
      const Tensor a = softmax_rows(x);
      CHECK(a.all_finite());
      for (int r = 0; r < 6; ++r) {
        double s = 0.0;
        for (int c = 0; c < 9; ++c) {
          CHECK(a.at(r, c) >= 0.0f);
          s += a.at(r, c);
        }
        CHECK(std::abs(s - 1.0) <= 1e-6);
      }
    }
  }
}

TEST_SUITE("pooling and normalization") {
  TEST_CASE("global pooling") {
    const Tensor x({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
    CHECK(global_pool(x, PoolMode::kAvg)[0] == 2.5f);
    CHECK(global_pool(x, PoolMode::kMax)[0] == 4.0f);
    const Tensor c({2, 3, 4, 5}, -1.25f);
    for (PoolMode m : {PoolMode::kAvg, PoolMode::kMax}) {
      const Tensor g = global_pool(c, m);
      CHECK(g.dims() == std::vector<int>{2, 3, 1, 1});
      for (float v : g.data()) CHECK(v == -1.25f);
    }
  }

  TEST_CASE("global pooling matches a per-channel loop") {
    std::mt19937_64 rng(10);
    const Tensor x = random_tensor({1, 3, 5, 5}, rng);
    const Tensor avg = global_pool(x, PoolMode::kAvg), mx = global_pool(x, PoolMode::kMax);
    for (int c = 0; c < 3; ++c) {
      double s = 0.0;
      float m = -1e30f;
      for (int y = 0; y < 5; ++y) {
        for (int xx = 0; xx < 5; ++xx) {
          s += x.at(0, c, y, xx);
          m = std::max(m, x.at(0, c, y, xx));
        }
      }
      CHECK(avg[c] == doctest::Approx(s / 25.0).epsilon(1e-6));
      CHECK(mx[c] == m);
    }
  }

  TEST_CASE("layer norm standardizes over channels") {
    const Tensor x({1, 2, 1, 1}, std::vector<float>{1, 3});
    const Tensor y = layer_norm(x, NormParams::identity("ln", 2));
    CHECK(std::abs(y[0] + 1.0f) <= 1e-4);
    CHECK(std::abs(y[1] - 1.0f) <= 1e-4);

    const Tensor flat = layer_norm(Tensor({1, 3, 2, 2}, 4.0f), NormParams::identity("ln", 3));
    for (float v : flat.data()) CHECK(v == 0.0f);

    NormParams shifted = NormParams::identity("ln", 1);
    shifted.shift[0] = 0.75f;
    const Tensor single = layer_norm(Tensor({1, 1, 2, 2}, 3.0f), shifted);
    for (float v : single.data()) CHECK(v == 0.75f);
  }

  TEST_CASE("layer norm moments on random input") {
    std::mt19937_64 rng(11);
    const Tensor y = layer_norm(random_tensor({1, 4, 2, 2}, rng, -3, 3), NormParams::identity("ln", 4));
    for (int py = 0; py < 2; ++py) {
      for (int px = 0; px < 2; ++px) {
        double m = 0.0, v = 0.0;
        for (int c = 0; c < 4; ++c) m += y.at(0, c, py, px);
        m /= 4;
        for (int c = 0; c < 4; ++c) v += (y.at(0, c, py, px) - m) * (y.at(0, c, py, px) - m);
        v /= 4;
        CHECK(std::abs(m) < 1e-6);
        CHECK(std::abs(v - 1.0) < 1e-4);
      }
    }
  }

  TEST_CASE("batch norm with relu") {
    std::mt19937_64 rng(12);
    const Tensor x = random_tensor({2, 3, 4, 4}, rng, -5, 5);
    const Tensor y = batch_norm_act(x, NormParams::identity("bn", 3));
    for (float v : y.data()) CHECK(v >= 0.0f);

    NormParams p = NormParams::identity("bn", 1);
    p.shift[0] = 2.0f;
    const Tensor shifted = batch_norm_act(Tensor({2, 1, 3, 3}, 7.0f), p);
    for (float v : shifted.data()) CHECK(v == 2.0f);

    // Pre-activation mean per channel: feed a large positive shift so the
    // ReLU is inactive, then remove it.
    NormParams lifted = NormParams::identity("bn", 3);
    for (int c = 0; c < 3; ++c) lifted.shift[c] = 100.0f;
    const Tensor z = batch_norm_act(x, lifted);
    for (int c = 0; c < 3; ++c) {
      double m = 0.0;
      for (int n = 0; n < 2; ++n) {
        for (int i = 0; i < 16; ++i) m += z.plane_ptr(n, c)[i] - 100.0;
      }
      CHECK(std::abs(m / 32.0) < 1e-5);
    }
  }
}

TEST_SUITE("activations") {
  TEST_CASE("scalar values") {
    CHECK(activate(0.0f, Activation::kSigmoid) == 0.5f);
    CHECK(activate(-1.0f, Activation::kRelu) == 0.0f);
    CHECK(activate(2.0f, Activation::kRelu) == 2.0f);
    CHECK(activate(0.0f, Activation::kGelu) == 0.0f);
    const double x = 3.0;
    const double want = 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / std::numbers::pi) * (x + 0.044715 * x * x * x)));
    CHECK(activate(3.0f, Activation::kGelu) == doctest::Approx(want).epsilon(1e-6));
    CHECK(activate(3.0f, Activation::kGelu) == doctest::Approx(2.9964).epsilon(1e-4));
  }

  TEST_CASE("tensor form is elementwise and finite at extremes") {
    const Tensor x({4}, std::vector<float>{-100, -1, 1, 100});
    for (Activation a : {Activation::kRelu, Activation::kGelu, Activation::kSigmoid}) {
      const Tensor y = activate(x, a);
      CHECK(y.all_finite());
      for (int i = 0; i < 4; ++i) CHECK(y[i] == activate(x[i], a));
    }
  }
}

TEST_SUITE("resize") {
  TEST_CASE("same size is the identity and constants stay constant") {
    std::mt19937_64 rng(13);
    const Tensor x = random_tensor({1, 2, 5, 7}, rng);
    CHECK(resize_bilinear(x, 5, 7) == x);
    const Tensor flat = resize_bilinear(Tensor({1, 1, 3, 3}, 0.3f), 7, 2);
    for (float v : flat.data()) CHECK(v == doctest::Approx(0.3f));
  }

  TEST_CASE("2x2 to 4x4 hand table") {
    const Tensor x({1, 1, 2, 2}, std::vector<float>{0, 1, 2, 3});
    const Tensor y = resize_bilinear(x, 4, 4);
    const float want[16] = {0.0f, 0.25f, 0.75f, 1.0f,  0.5f, 0.75f, 1.25f, 1.5f,
                            1.5f, 1.75f, 2.25f, 2.5f, 2.0f, 2.25f, 2.75f, 3.0f};
    for (int i = 0; i < 16; ++i) CHECK(y[i] == doctest::Approx(want[i]).epsilon(1e-7));
  }

  TEST_CASE("random resizes match the per-pixel formula and respect bounds") {
    std::mt19937_64 rng(14);
    for (auto [oh, ow] : {std::pair{11, 3}, std::pair{4, 4}, std::pair{1, 9}, std::pair{23, 17}}) {
      const Tensor x = random_tensor({1, 2, 6, 5}, rng);
      const Tensor y = resize_bilinear(x, oh, ow);
      for (int c = 0; c < 2; ++c) {
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            CHECK(y.at(0, c, oy, ox) == doctest::Approx(oracle::bilinear_sample(x, 0, c, oh, ow, oy, ox)).epsilon(1e-6));
          }
        }
      }
      CHECK(y.min() >= x.min());
      CHECK(y.max() <= x.max());
    }
  }
}

TEST_SUITE("concat") {
  TEST_CASE("channel counts add and slicing recovers the parts") {
    std::mt19937_64 rng(15);
    const Tensor a = random_tensor({1, 2, 3, 4}, rng), b = random_tensor({1, 3, 3, 4}, rng),
                 c = random_tensor({1, 1, 3, 4}, rng);
    const Tensor ab = concat_channels({a, b});
    CHECK(ab.dims() == std::vector<int>{1, 5, 3, 4});
    CHECK(concat_channels({a}) == a);
    const Tensor abc = concat_channels({a, b, c});
    CHECK(slice_channels(abc, 0, 2) == a);
    CHECK(slice_channels(abc, 2, 3) == b);
    CHECK(slice_channels(abc, 5, 1) == c);
    const Tensor wrong({1, 1, 3, 5});
    CHECK_THROWS_AS(concat_channels({a, wrong}), ShapeError);
  }

  TEST_CASE("broadcast and gating helpers") {
    std::mt19937_64 rng(16);
    const Tensor x = random_tensor({1, 2, 3, 3}, rng);
    const Tensor g({1, 2, 1, 1}, std::vector<float>{2, -1});
    const Tensor y = scale_channels(x, g);
    CHECK(y.at(0, 0, 1, 2) == 2 * x.at(0, 0, 1, 2));
    CHECK(y.at(0, 1, 2, 0) == -x.at(0, 1, 2, 0));
    const Tensor s = random_tensor({1, 1, 3, 3}, rng);
    const Tensor z = scale_spatial(x, s);
    CHECK(z.at(0, 1, 2, 1) == x.at(0, 1, 2, 1) * s.at(0, 0, 2, 1));
    CHECK(broadcast_spatial(g, 2, 5).at(0, 1, 1, 4) == -1.0f);
    CHECK(broadcast_channels(s, 4).at(0, 3, 1, 1) == s.at(0, 0, 1, 1));
  }
}
