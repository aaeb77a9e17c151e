#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <random>
#include <string>

#include "asgnet/config.hpp"
#include "asgnet/error.hpp"
#include "asgnet/io.hpp"
#include "support.hpp"

using namespace asg;
using testing::random_tensor;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

std::vector<std::uint8_t> pgm(const std::string& header, std::initializer_list<std::uint8_t> payload) {
  std::vector<std::uint8_t> out = bytes_of(header);
  out.insert(out.end(), payload);
  return out;
}

template <class F>
std::uint64_t format_offset(F&& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.offset();
  }
  FAIL("expected a format error");
  return 0;
}

EncoderConfig small_config() {
  EncoderConfig c = EncoderConfig::desk(64);
  c.width = 8;
  return c;
}

std::size_t find_bytes(const std::vector<std::uint8_t>& hay, const std::string& needle) {
  const auto it = std::search(hay.begin(), hay.end(), needle.begin(), needle.end());
  REQUIRE(it != hay.end());
  return static_cast<std::size_t>(it - hay.begin());
}

}  // namespace

TEST_CASE("P5 payload scales to [0, 1]") {
  const Tensor t = decode_image(pgm("P5\n2 2\n255\n", {0, 255, 128, 0}));
  REQUIRE(t.dims() == std::vector<int>{1, 1, 2, 2});
  CHECK(t[0] == 0.0f);
  CHECK(t[1] == 1.0f);
  CHECK(t[2] == 128.0f / 255.0f);
  CHECK(t[3] == 0.0f);
  const Tensor b = decode_image(pgm("P5\n2 2\n255\n", {0, 255, 128, 127}), true);
  CHECK(b.data()[2] == 1.0f);
  CHECK(b.data()[3] == 0.0f);
}

TEST_CASE("header comments do not change the result") {
  const auto plain = pgm("P5\n3 1\n255\n", {10, 20, 30});
  const auto commented = pgm("P5 # magic\n# whole line\n3 # width\n1\n# before maxval\n255\n", {10, 20, 30});
  CHECK(decode_image(plain) == decode_image(commented));
}

TEST_CASE("P6 round trip is bit-exact and interleaves channels") {
  std::mt19937_64 rng(51);
  std::vector<std::uint8_t> bytes = bytes_of("P6\n4 3\n255\n");
  for (int i = 0; i < 36; ++i) bytes.push_back(static_cast<std::uint8_t>(rng()));
  const Tensor t = decode_image(bytes);
  REQUIRE(t.dims() == std::vector<int>{1, 3, 3, 4});
  CHECK(t.at(0, 1, 0, 0) == bytes[11 + 1] / 255.0f);
  CHECK(t.at(0, 2, 2, 3) == bytes[11 + 35] / 255.0f);
  CHECK(encode_image(t) == bytes);

  const auto dir = testing::scratch_dir("io_p6");
  write_file(dir / "a.ppm", bytes);
  const Tensor again = read_image(dir / "a.ppm");
  write_image(again, dir / "b.ppm");
  CHECK(read_file(dir / "b.ppm") == bytes);
  std::filesystem::remove_all(dir);
}

TEST_CASE("quantization rounds half up and stays within 1/510") {
  const auto half = encode_image(Tensor({1, 1, 1, 2}, {0.5f, 1.0f}));
  CHECK(half[half.size() - 2] == 128);
  CHECK(half.back() == 255);
  std::mt19937_64 rng(52);
  const Tensor t = random_tensor({1, 1, 17, 23}, rng, 0.0, 1.0);
  const Tensor back = decode_image(encode_image(t));
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(std::abs(back[i] - t[i]) <= 1.0f / 510.0f + 1e-7f);
  CHECK_THROWS_AS(encode_image(Tensor({1, 1, 1, 1}, 1.5f)), ValidationError);
  CHECK_THROWS_AS(encode_image(Tensor({1, 2, 1, 1})), ValidationError);
}

TEST_CASE("malformed images report byte offsets") {
  CHECK(format_offset([] { decode_image(bytes_of("P4\n1 1\n255\n\x01")); }) == 0);
  CHECK(format_offset([] { decode_image(pgm("P5\n2 2\n255\n", {1, 2, 3})); }) == 14);
  CHECK(format_offset([] { decode_image(pgm("P5\n2 2\n65535\n", {1, 2, 3, 4})); }) == 7);
  CHECK(format_offset([] { decode_image(bytes_of("P5\n2 x\n255\n")); }) == 5);
  CHECK_THROWS_AS(decode_image(bytes_of("P5\n2")), FormatError);

  const auto dir = testing::scratch_dir("io_bad");
  write_file(dir / "bad.pgm", bytes_of("XX"));
  try {
    read_image(dir / "bad.pgm");
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("bad.pgm") != std::string::npos);
  }
  CHECK_THROWS_AS(read_image(dir / "absent.pgm"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("tensor files round-trip bit-exactly") {
  std::mt19937_64 rng(53);
  const auto dir = testing::scratch_dir("io_tensor");
  const std::vector<std::vector<int>> shapes{{7}, {3, 5}, {2, 3, 4}, {1, 2, 5, 3}};
  for (const auto& dims : shapes) {
    Tensor t = random_tensor(dims, rng, -1e3, 1e3);
    t[0] = -0.0f;
    save_tensor(t, dir / "t.ast");
    const Tensor back = load_tensor(dir / "t.ast");
    CHECK(back.dims() == t.dims());
    CHECK(std::memcmp(back.data().data(), t.data().data(), t.size() * sizeof(float)) == 0);
  }
  const auto bytes = encode_tensor(Tensor({2, 1}, {1.0f, -2.0f}));
  const std::vector<std::uint8_t> expect{'A', 'S', 'T', '1', 2, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0,
                                         0,   0,   0x80, 0x3f, 0, 0, 0, 0xc0};
  CHECK(bytes == expect);
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed tensor files") {
  auto bytes = encode_tensor(Tensor({2, 2}, 1.0f));
  std::size_t off = 0;
  auto bad = bytes;
  bad[3] = '2';
  CHECK(format_offset([&] { off = 0; decode_tensor(bad, off); }) == 0);
  bad = bytes;
  bad[4] = 9;
  CHECK(format_offset([&] { off = 0; decode_tensor(bad, off); }) == 4);
  bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS((off = 0, decode_tensor(bad, off)), FormatError);

  const auto dir = testing::scratch_dir("io_tensor_bad");
  bad = bytes;
  bad.push_back(0);
  write_file(dir / "x.ast", bad);
  CHECK_THROWS_AS(load_tensor(dir / "x.ast"), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("weights round-trip and are byte-identical per seed") {
  const EncoderConfig cfg = small_config();
  const AsgNetParams a = init_params(cfg, 42);
  const auto bytes = encode_weights(a);
  CHECK(bytes == encode_weights(init_params(cfg, 42)));
  CHECK(bytes != encode_weights(init_params(cfg, 43)));

  AsgNetParams b = init_params(cfg, 7);
  decode_weights(b, bytes);
  std::vector<const Tensor*> ta, tb;
  visit_params(a, [&](const std::string&, const Tensor& t) { ta.push_back(&t); });
  visit_params(b, [&](const std::string&, const Tensor& t) { tb.push_back(&t); });
  REQUIRE(ta.size() == tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i] == *tb[i]);

  const auto dir = testing::scratch_dir("io_weights");
  save_weights(a, dir / "w1.asgw");
  save_weights(init_params(cfg, 42), dir / "w2.asgw");
  CHECK(read_file(dir / "w1.asgw") == read_file(dir / "w2.asgw"));
  AsgNetParams c = init_params(cfg, 9);
  load_weights(c, dir / "w1.asgw");
  CHECK(encode_weights(c) == bytes);
  std::filesystem::remove_all(dir);
}

TEST_CASE("weights errors name the offending tensor") {
  const EncoderConfig cfg = small_config();
  const AsgNetParams src = init_params(cfg, 42);
  const auto bytes = encode_weights(src);

  SUBCASE("renamed tensor") {
    auto bad = bytes;
    const std::size_t at = find_bytes(bad, "mse.head.weight");
    bad[at + 4] = 'H';
    AsgNetParams p = init_params(cfg, 1);
    try {
      decode_weights(p, bad);
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()) == "missing parameter mse.head.weight");
    }
  }
  SUBCASE("shape mismatch") {
    EncoderConfig other = cfg;
    other.width = 16;
    AsgNetParams p = init_params(other, 1);
    try {
      decode_weights(p, bytes);
      FAIL("expected an error");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("parameter ") != std::string::npos);
    }
  }
  SUBCASE("extra tensor") {
    EncoderConfig other = cfg;
    AsgNetParams p = init_params(other, 1);
    // Append one record and bump the count.
    auto bad = bytes;
    std::uint32_t count;
    std::memcpy(&count, bad.data() + 4, 4);
    ++count;
    std::memcpy(bad.data() + 4, &count, 4);
    const std::string name = "extra.weight";
    bad.push_back(static_cast<std::uint8_t>(name.size()));
    bad.push_back(0);
    bad.insert(bad.end(), name.begin(), name.end());
    const auto rec = encode_tensor(Tensor({1}, 1.0f));
    bad.insert(bad.end(), rec.begin(), rec.end());
    try {
      decode_weights(p, bad);
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()) == "unknown parameter extra.weight");
    }
  }
  SUBCASE("duplicate and truncated") {
    AsgNetParams p = init_params(cfg, 1);
    auto bad = bytes;
    bad.resize(bad.size() - 3);
    CHECK_THROWS_AS(decode_weights(p, bad), FormatError);
    bad = bytes;
    bad[0] = 'X';
    CHECK(format_offset([&] { decode_weights(p, bad); }) == 0);
  }
}

TEST_CASE("run config parsing") {
  const RunConfig d = parse_run_config("{}");
  CHECK(d.encoder.input_h == 352);
  CHECK(d.encoder.width == 96);
  CHECK(d.seed == 42);
  CHECK(d.threshold == 0.5);

  const RunConfig c = parse_run_config(R"({"input_size": [64, 96], "width": 16, "encoder_channels": [4, 8, 8, 16],
      "seed": 7, "ablate": ["edge_branch", "asf_in_mse"], "dilations": [1, 2, 3, 4, 5, 6], "threshold": 0.4})");
  CHECK(c.encoder.input_h == 64);
  CHECK(c.encoder.input_w == 96);
  CHECK(c.encoder.width == 16);
  CHECK(c.encoder.stage_channels == std::array<int, 4>{4, 8, 8, 16});
  CHECK(c.seed == 7);
  CHECK_FALSE(c.flags.edge_branch);
  CHECK_FALSE(c.flags.asf_in_mse);
  CHECK(c.flags.asf_in_snp);
  CHECK(c.flags.dilation_set == std::array<int, 6>{1, 2, 3, 4, 5, 6});
  CHECK(c.threshold == 0.4);

  const RunConfig again = parse_run_config(dump_run_config(c));
  CHECK(dump_run_config(again) == dump_run_config(c));
  CHECK(parse_run_config(R"({"input_size": 128})").encoder.input_w == 128);
}

TEST_CASE("run config errors") {
  CHECK_THROWS_AS(parse_run_config("{"), ValidationError);
  CHECK_THROWS_AS(parse_run_config("[]"), ValidationError);
  CHECK_THROWS_AS(parse_run_config(R"({"colour": 1})"), ValidationError);
  CHECK_THROWS_AS(parse_run_config(R"({"input_size": 100})"), ValidationError);
  CHECK_THROWS_AS(parse_run_config(R"({"width": 4})"), ValidationError);
  CHECK_THROWS_AS(parse_run_config(R"({"width": 9.5})"), ValidationError);
  CHECK_THROWS_AS(parse_run_config(R"({"dilations": [1, 2, 3]})"), ValidationError);
  CHECK_THROWS_AS(parse_run_config(R"({"ablate": ["everything"]})"), ValidationError);
  CHECK_THROWS_AS(parse_run_config(R"({"threshold": 1.0})"), ValidationError);
  CHECK_THROWS_AS(parse_run_config(R"({"seed": -1})"), ValidationError);

  AblationFlags f;
  apply_ablation_list(f, "asf_in_dci,,reverse_attention");
  CHECK_FALSE(f.asf_in_dci);
  CHECK_FALSE(f.reverse_attention);
  CHECK(f.edge_branch);
  try {
    disable_flag(f, "nope");
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("asf_in_snp") != std::string::npos);
  }
  CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), IoError);
}
