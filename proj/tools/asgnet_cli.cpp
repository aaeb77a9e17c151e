// asgnet: forward inference, evaluation and self-verification.
//
// Exit status: 0 success, 1 validation failure or bad usage, 2 I/O error.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "asgnet/config.hpp"
#include "asgnet/error.hpp"
#include "asgnet/io.hpp"
#include "asgnet/metrics.hpp"
#include "asgnet/network.hpp"
#include "asgnet/ops.hpp"
#include "asgnet/selfcheck.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitIo = 2;

struct ForwardArgs {
  std::string in, weights, out, config, ablate, dump_dir;
};

struct MetricsArgs {
  std::string pred, gt, report, config;
};

struct InitArgs {
  std::optional<std::uint64_t> seed;
  std::string out, config;
};

asg::RunConfig config_from(const std::string& path) {
  return path.empty() ? asg::RunConfig{} : asg::load_run_config(path);
}

// Grayscale inputs are replicated to three channels.
asg::Tensor as_rgb(const asg::Tensor& img) {
  if (img.c() == 3) return img;
  return asg::concat_channels({img, img, img});
}

int run_forward(const ForwardArgs& a) {
  asg::RunConfig cfg = config_from(a.config);
  asg::apply_ablation_list(cfg.flags, a.ablate);
  cfg.validate();

  asg::AsgNetParams params = asg::init_params(cfg.encoder, cfg.seed);
  asg::load_weights(params, a.weights);

  const asg::Tensor original = as_rgb(asg::read_image(a.in));
  const int h = original.h(), w = original.w();
  const asg::Tensor image = (h == cfg.encoder.input_h && w == cfg.encoder.input_w)
                                ? original
                                : asg::resize_bilinear(original, cfg.encoder.input_h, cfg.encoder.input_w);

  const asg::StagePyramid pyr = asg::forward(image, params, cfg.flags);
  asg::Tensor mask = (h == pyr.mask.h() && w == pyr.mask.w()) ? pyr.mask : asg::resize_bilinear(pyr.mask, h, w);
  for (float& v : mask.data()) v = std::clamp(v, 0.0f, 1.0f);
  asg::write_image(mask, a.out);

  if (!a.dump_dir.empty()) {
    std::error_code ec;
    fs::create_directories(a.dump_dir, ec);
    if (ec) throw asg::IoError("cannot create " + a.dump_dir + ": " + ec.message());
    for (const auto& [name, t] : pyr.named()) asg::save_tensor(*t, fs::path(a.dump_dir) / (name + ".ast"));
  }
  std::cout << "wrote " << a.out << " (" << h << "x" << w << ")\n";
  return kExitOk;
}

int run_metrics(const MetricsArgs& a) {
  const asg::RunConfig cfg = config_from(a.config);
  const auto report = asg::metrics::evaluate_dir(a.pred, a.gt, cfg.threshold);
  asg::metrics::write_table(std::cout, report);
  if (!a.report.empty()) {
    std::ofstream out(a.report, std::ios::trunc);
    if (!out) throw asg::IoError("cannot open " + a.report + " for writing");
    asg::metrics::write_records(out, report);
    if (!out) throw asg::IoError("write failed: " + a.report);
  }
  return kExitOk;
}

int run_selfcheck() {
  const auto report = asg::run_selfcheck(42, [](const asg::CheckOutcome& c) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) std::cout << " (" << c.detail << ")";
    std::cout << std::endl;
  });
  std::cout << report.passed() << "/" << report.checks.size() << " checks passed\n";
  return report.failed() == 0 ? kExitOk : kExitInvalid;
}

int run_gradcheck(int trials, std::uint64_t seed) {
  bool ok = true;
  for (const auto& g : asg::run_gradcheck(trials, seed)) {
    std::printf("%s %-13s trials=%d max_rel=%.3e max_abs=%.3e\n", g.passed() ? "PASS" : "FAIL", g.loss.c_str(),
                g.trials, g.max_rel_error, g.max_abs_error);
    ok = ok && g.passed();
  }
  return ok ? kExitOk : kExitInvalid;
}

int run_init(const InitArgs& a) {
  asg::RunConfig cfg = config_from(a.config);
  if (a.seed) cfg.seed = *a.seed;
  asg::save_weights(asg::init_params(cfg.encoder, cfg.seed), a.out);
  std::cout << "wrote " << a.out << " (seed " << cfg.seed << ")\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asgnet: spectrum-guided polyp segmentation graph"};
  app.require_subcommand(1);

  ForwardArgs fwd;
  auto* forward = app.add_subcommand("forward", "Run the network on one image and write the mask");
  forward->add_option("--in", fwd.in, "Input PGM/PPM image")->required();
  forward->add_option("--weights", fwd.weights, "Weights file")->required();
  forward->add_option("--out", fwd.out, "Output mask (PGM)")->required();
  forward->add_option("--config", fwd.config, "Run configuration (JSON)");
  forward->add_option("--ablate", fwd.ablate, "Comma-separated paths to disable");
  forward->add_option("--dump-stages", fwd.dump_dir, "Directory for per-stage tensor files");

  MetricsArgs met;
  auto* metrics = app.add_subcommand("metrics", "Evaluate predictions against ground truth");
  metrics->add_option("--pred", met.pred, "Prediction directory")->required();
  metrics->add_option("--gt", met.gt, "Ground-truth directory")->required();
  metrics->add_option("--report", met.report, "Per-image record file");
  metrics->add_option("--config", met.config, "Run configuration (threshold)");

  auto* selfcheck = app.add_subcommand("selfcheck", "Run the invariant battery");

  int trials = 20;
  std::uint64_t grad_seed = 42;
  auto* gradcheck = app.add_subcommand("gradcheck", "Check loss gradients against finite differences");
  gradcheck->add_option("--trials", trials, "Random instances per loss")->check(CLI::PositiveNumber);
  gradcheck->add_option("--seed", grad_seed, "Instance seed");

  InitArgs init;
  auto* init_weights = app.add_subcommand("init-weights", "Write seeded initial weights");
  init_weights->add_option("--seed", init.seed, "Initialization seed (overrides the config)");
  init_weights->add_option("--out", init.out, "Weights file to write")->required();
  init_weights->add_option("--config", init.config, "Run configuration (JSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitInvalid;
  }

  try {
    if (forward->parsed()) return run_forward(fwd);
    if (metrics->parsed()) return run_metrics(met);
    if (selfcheck->parsed()) return run_selfcheck();
    if (gradcheck->parsed()) return run_gradcheck(trials, grad_seed);
    if (init_weights->parsed()) return run_init(init);
  } catch (const asg::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const asg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}
