#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "asgnet/network.hpp"
#include "asgnet/tensor.hpp"

namespace asg {

// Tensor file: "AST1", u32 rank, rank x u32 dims, f32 payload. All integers
// and floats little-endian.
inline constexpr char kTensorMagic[4] = {'A', 'S', 'T', '1'};
// Weights file: "ASGW", u32 count, then count x [u16 name length, name bytes,
// tensor record].
inline constexpr char kWeightsMagic[4] = {'A', 'S', 'G', 'W'};

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
/// Decodes one tensor record starting at `offset`, advancing it past the record.
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes, std::size_t& offset);

void save_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

/// Binary PGM (P5) or PPM (P6) with maxval 255, scaled to [0, 1] as a
/// (1, C, H, W) tensor. With `binarize`, values >= 0.5 become 1, others 0.
Tensor read_image(const std::filesystem::path& path, bool binarize = false);
Tensor decode_image(const std::vector<std::uint8_t>& bytes, bool binarize = false);
/// Writes a (1, 1|3, H, W) tensor with values in [0, 1]; bytes are
/// floor(255 v + 0.5).
void write_image(const Tensor& t, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_image(const Tensor& t);

std::vector<std::uint8_t> encode_weights(const AsgNetParams& params);
void save_weights(const AsgNetParams& params, const std::filesystem::path& path);
/// Fills `params` (already built for the right configuration) from a weights
/// file. Unknown, missing, duplicated or mis-shaped tensors are errors.
void load_weights(AsgNetParams& params, const std::filesystem::path& path);
void decode_weights(AsgNetParams& params, const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace asg
