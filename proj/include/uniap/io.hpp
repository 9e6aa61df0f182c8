#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "uniap/pooling.hpp"
#include "uniap/querysd.hpp"
#include "uniap/tensor.hpp"
#include "uniap/token_mask.hpp"

namespace uniap::io {

// .fmap layout, all little-endian:
//   "FMAP" | u32 version=1 | u32 height | u32 width | u32 dim | u32 dtype=0
//   | height*width*dim f32, row-major
inline constexpr std::uint32_t kFmapVersion = 1;
inline constexpr std::uint32_t kFmapDtypeF32 = 0;
inline constexpr std::size_t kFmapHeaderBytes = 24;

std::vector<std::uint8_t> encode_fmap(const FeatureMap& fm);
// Throws BadMagic, UnsupportedVersion, TruncatedPayload. The returned map is
// flagged normalized when every row is unit-norm within 1e-4.
FeatureMap decode_fmap(const std::vector<std::uint8_t>& bytes);

void write_fmap(const FeatureMap& fm, const std::filesystem::path& path);
FeatureMap read_fmap(const std::filesystem::path& path);

struct MaskJsonOptions {
  bool include_features = true;
};

std::string mask_json_string(const MaskPyramid& p,
                             const MaskJsonOptions& options = {});
MaskPyramid parse_mask_json(const std::string& text);

void write_mask_json(const MaskPyramid& p, const std::filesystem::path& path,
                     const MaskJsonOptions& options = {});
MaskPyramid read_mask_json(const std::filesystem::path& path);

// Ground-truth / student mask list: {"height", "width", "masks": [{"rle"}]}.
std::string mask_list_json_string(std::size_t height, std::size_t width,
                                  const std::vector<TokenMask>& masks);
std::vector<TokenMask> parse_mask_list_json(const std::string& text);
void write_mask_list_json(std::size_t height, std::size_t width,
                          const std::vector<TokenMask>& masks,
                          const std::filesystem::path& path);
std::vector<TokenMask> read_mask_list_json(const std::filesystem::path& path);

// P5 label map: mask i gets gray level (i mod 255) + 1, background 0; on
// overlap the earlier mask wins.
std::vector<std::uint8_t> labelmap_pgm_bytes(std::size_t height,
                                             std::size_t width,
                                             const std::vector<TokenMask>& masks);
void render_labelmap_pgm(std::size_t height, std::size_t width,
                         const std::vector<TokenMask>& masks,
                         const std::filesystem::path& path);

struct Config {
  UniapConfig uniap;
  QuerySDConfig querysd;
};

// Missing keys take defaults; unknown keys, wrong types and broken
// invariants raise InvalidConfig.
Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace uniap::io
