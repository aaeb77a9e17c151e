#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "asgnet/network.hpp"

namespace asg {

/// Everything a CLI run needs besides its file arguments. Defaults to the
/// desk encoder at 352 x 352 with the full graph enabled.
struct RunConfig {
  EncoderConfig encoder = EncoderConfig::desk(352);
  AblationFlags flags;
  std::uint64_t seed = 42;
  double threshold = 0.5;

  void validate() const;
};

/// Accepted keys: input_size (int or [h, w]), width, encoder_channels (4 ints),
/// seed, ablate (list of flag names), dilations (6 ints), threshold.
/// Unknown keys are rejected.
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string dump_run_config(const RunConfig& config);

/// Disables one ablation flag by name: asf_in_snp, asf_in_mse, asf_in_dci,
/// edge_branch, reverse_attention.
void disable_flag(AblationFlags& flags, std::string_view name);
/// Comma-separated list; empty items are ignored.
void apply_ablation_list(AblationFlags& flags, std::string_view list);

}  // namespace asg
