#include "asgnet/config.hpp"

#include <json.hpp>

#include "asgnet/error.hpp"
#include "asgnet/io.hpp"

namespace asg {
namespace {

using nlohmann::json;

int as_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ValidationError("config: '" + key + "' must be an integer");
  return v.get<int>();
}

template <std::size_t N>
std::array<int, N> int_array(const json& v, const std::string& key) {
  if (!v.is_array() || v.size() != N) {
    throw ValidationError("config: '" + key + "' must be a list of " + std::to_string(N) + " integers");
  }
  std::array<int, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = as_int(v[i], key);
  return out;
}

const char* const kFlagNames[] = {"asf_in_snp", "asf_in_mse", "asf_in_dci", "edge_branch", "reverse_attention"};

}  // namespace

void RunConfig::validate() const {
  encoder.validate();
  flags.validate();
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("config: threshold must lie in (0, 1)");
}

void disable_flag(AblationFlags& flags, std::string_view name) {
  if (name == "asf_in_snp") {
    flags.asf_in_snp = false;
  } else if (name == "asf_in_mse") {
    flags.asf_in_mse = false;
  } else if (name == "asf_in_dci") {
    flags.asf_in_dci = false;
  } else if (name == "edge_branch") {
    flags.edge_branch = false;
  } else if (name == "reverse_attention") {
    flags.reverse_attention = false;
  } else {
    std::string known;
    for (const char* n : kFlagNames) known += std::string(known.empty() ? "" : ", ") + n;
    throw ValidationError("unknown ablation flag '" + std::string(name) + "' (known: " + known + ")");
  }
}

void apply_ablation_list(AblationFlags& flags, std::string_view list) {
  while (!list.empty()) {
    const auto comma = list.find(',');
    const auto item = list.substr(0, comma);
    if (!item.empty()) disable_flag(flags, item);
    if (comma == std::string_view::npos) break;
    list.remove_prefix(comma + 1);
  }
}

RunConfig parse_run_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("config: top level must be an object");

  RunConfig cfg;
  for (const auto& [key, v] : doc.items()) {
    if (key == "input_size") {
      if (v.is_array()) {
        const auto hw = int_array<2>(v, key);
        cfg.encoder.input_h = hw[0];
        cfg.encoder.input_w = hw[1];
      } else {
        cfg.encoder.input_h = cfg.encoder.input_w = as_int(v, key);
      }
    } else if (key == "width") {
      cfg.encoder.width = as_int(v, key);
    } else if (key == "encoder_channels") {
      cfg.encoder.stage_channels = int_array<kStageCount>(v, key);
    } else if (key == "seed") {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw ValidationError("config: 'seed' must be a non-negative integer");
      }
      cfg.seed = v.get<std::uint64_t>();
    } else if (key == "ablate") {
      if (!v.is_array()) throw ValidationError("config: 'ablate' must be a list of flag names");
      for (const auto& name : v) {
        if (!name.is_string()) throw ValidationError("config: 'ablate' entries must be strings");
        disable_flag(cfg.flags, name.get<std::string>());
      }
    } else if (key == "dilations") {
      cfg.flags.dilation_set = int_array<6>(v, key);
    } else if (key == "threshold") {
      if (!v.is_number()) throw ValidationError("config: 'threshold' must be a number");
      cfg.threshold = v.get<double>();
    } else {
      throw ValidationError("config: unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_run_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string dump_run_config(const RunConfig& c) {
  json doc;
  doc["input_size"] = {c.encoder.input_h, c.encoder.input_w};
  doc["width"] = c.encoder.width;
  doc["encoder_channels"] = c.encoder.stage_channels;
  doc["seed"] = c.seed;
  json ablate = json::array();
  const bool on[] = {c.flags.asf_in_snp, c.flags.asf_in_mse, c.flags.asf_in_dci, c.flags.edge_branch,
                     c.flags.reverse_attention};
  for (std::size_t i = 0; i < std::size(on); ++i) {
    if (!on[i]) ablate.push_back(kFlagNames[i]);
  }
  doc["ablate"] = ablate;
  doc["dilations"] = c.flags.dilation_set;
  doc["threshold"] = c.threshold;
  return doc.dump(2);
}

}  // namespace asg
