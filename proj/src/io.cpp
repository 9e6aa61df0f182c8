#include "uniap/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <type_traits>

#include "json.hpp"

#include "uniap/error.hpp"
#include "uniap/maskops.hpp"

namespace uniap::io {

using nlohmann::json;

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIoFailure, "read failed: " + path.string());
  return bytes;
}

void write_bytes(const std::filesystem::path& path,
                 const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed: " + path.string());
}

json rle_json(const TokenMask& m) {
  return json{{"counts", rle_encode(m).counts}};
}

TokenMask mask_from_json(const json& j, std::size_t h, std::size_t w) {
  RleMask r{h, w, j.at("rle").at("counts").get<std::vector<std::uint64_t>>()};
  return rle_decode(r);
}

json pseudo_mask_json(const PseudoMask& m, const MaskJsonOptions& options) {
  json j{{"rle", rle_json(m.mask)},
         {"area", m.mask.area()},
         {"level", m.level}};
  if (options.include_features) j["feature"] = m.feature;
  return j;
}

template <typename Fn>
auto json_guard(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedJson, e.what());
  }
}

}  // namespace

std::vector<std::uint8_t> encode_fmap(const FeatureMap& fm) {
  std::vector<std::uint8_t> out;
  out.reserve(kFmapHeaderBytes + fm.data().size() * 4);
  for (char ch : {'F', 'M', 'A', 'P'}) out.push_back(static_cast<std::uint8_t>(ch));
  put_u32(out, kFmapVersion);
  put_u32(out, static_cast<std::uint32_t>(fm.height()));
  put_u32(out, static_cast<std::uint32_t>(fm.width()));
  put_u32(out, static_cast<std::uint32_t>(fm.dim()));
  put_u32(out, kFmapDtypeF32);
  for (float v : fm.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FeatureMap decode_fmap(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "FMAP", 4) != 0) {
    throw Error(ErrorCode::kBadMagic, "missing FMAP magic");
  }
  if (bytes.size() < kFmapHeaderBytes) {
    throw Error(ErrorCode::kTruncatedPayload, "header is cut short");
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kFmapVersion) {
    throw Error(ErrorCode::kUnsupportedVersion,
                "version " + std::to_string(version));
  }
  const std::uint64_t h = get_u32(bytes.data() + 8);
  const std::uint64_t w = get_u32(bytes.data() + 12);
  const std::uint64_t d = get_u32(bytes.data() + 16);
  const std::uint32_t dtype = get_u32(bytes.data() + 20);
  if (dtype != kFmapDtypeF32) {
    throw Error(ErrorCode::kUnsupportedVersion,
                "dtype code " + std::to_string(dtype));
  }
  const std::uint64_t count = h * w * d;
  const std::uint64_t payload = bytes.size() - kFmapHeaderBytes;
  if (payload != count * 4) {
    throw Error(ErrorCode::kTruncatedPayload,
                "header declares " + std::to_string(h) + "x" +
                    std::to_string(w) + "x" + std::to_string(d) + " (" +
                    std::to_string(count * 4) + " bytes), payload has " +
                    std::to_string(payload) + " bytes");
  }
  std::vector<float> data(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<float>(get_u32(bytes.data() + kFmapHeaderBytes + 4 * i));
  }
  bool unit = true;
  for (std::uint64_t p = 0; p < h * w && unit; ++p) {
    double n = 0.0;
    for (std::uint64_t k = 0; k < d; ++k) {
      const double v = data[p * d + k];
      n += v * v;
    }
    unit = std::abs(std::sqrt(n) - 1.0) <= 1e-4;
  }
  return FeatureMap(h, w, d, std::move(data), unit);
}

void write_fmap(const FeatureMap& fm, const std::filesystem::path& path) {
  write_bytes(path, encode_fmap(fm));
}

FeatureMap read_fmap(const std::filesystem::path& path) {
  return decode_fmap(read_bytes(path));
}

std::string mask_json_string(const MaskPyramid& p,
                             const MaskJsonOptions& options) {
  json levels = json::array();
  for (const PyramidLevel& level : p.levels) {
    json inst = json::array();
    json sem = json::array();
    for (const auto& m : level.instance) inst.push_back(pseudo_mask_json(m, options));
    for (const auto& m : level.semantic) sem.push_back(pseudo_mask_json(m, options));
    levels.push_back({{"tau", level.tau}, {"instance", inst}, {"semantic", sem}});
  }
  json root{{"height", p.height}, {"width", p.width}, {"levels", levels}};
  return root.dump() + "\n";
}

MaskPyramid parse_mask_json(const std::string& text) {
  return json_guard([&] {
    const json root = json::parse(text);
    MaskPyramid p;
    p.height = root.at("height").get<std::size_t>();
    p.width = root.at("width").get<std::size_t>();
    for (const json& lj : root.at("levels")) {
      PyramidLevel level;
      level.tau = lj.at("tau").get<double>();
      for (MaskKind kind : {MaskKind::kInstance, MaskKind::kSemantic}) {
        const char* key = kind == MaskKind::kInstance ? "instance" : "semantic";
        auto& list = kind == MaskKind::kInstance ? level.instance : level.semantic;
        for (const json& mj : lj.at(key)) {
          PseudoMask m;
          m.kind = kind;
          m.mask = mask_from_json(mj, p.height, p.width);
          m.level = mj.at("level").get<int>();
          if (mj.contains("area") &&
              mj.at("area").get<std::size_t>() != m.mask.area()) {
            throw Error(ErrorCode::kMalformedJson,
                        "area field disagrees with the decoded mask");
          }
          if (mj.contains("feature")) {
            m.feature = mj.at("feature").get<std::vector<float>>();
          }
          list.push_back(std::move(m));
        }
      }
      p.levels.push_back(std::move(level));
    }
    return p;
  });
}

void write_mask_json(const MaskPyramid& p, const std::filesystem::path& path,
                     const MaskJsonOptions& options) {
  write_text(path, mask_json_string(p, options));
}

MaskPyramid read_mask_json(const std::filesystem::path& path) {
  return parse_mask_json(read_text(path));
}

std::string mask_list_json_string(std::size_t height, std::size_t width,
                                  const std::vector<TokenMask>& masks) {
  json list = json::array();
  for (const auto& m : masks) {
    list.push_back({{"rle", rle_json(m)}, {"area", m.area()}});
  }
  return json{{"height", height}, {"width", width}, {"masks", list}}.dump() +
         "\n";
}

std::vector<TokenMask> parse_mask_list_json(const std::string& text) {
  return json_guard([&] {
    const json root = json::parse(text);
    const auto h = root.at("height").get<std::size_t>();
    const auto w = root.at("width").get<std::size_t>();
    std::vector<TokenMask> out;
    for (const json& mj : root.at("masks")) out.push_back(mask_from_json(mj, h, w));
    return out;
  });
}

void write_mask_list_json(std::size_t height, std::size_t width,
                          const std::vector<TokenMask>& masks,
                          const std::filesystem::path& path) {
  write_text(path, mask_list_json_string(height, width, masks));
}

std::vector<TokenMask> read_mask_list_json(const std::filesystem::path& path) {
  return parse_mask_list_json(read_text(path));
}

std::vector<std::uint8_t> labelmap_pgm_bytes(
    std::size_t height, std::size_t width, const std::vector<TokenMask>& masks) {
  std::vector<std::uint8_t> labels(height * width, 0);
  for (std::size_t i = masks.size(); i-- > 0;) {
    if (masks[i].height() != height || masks[i].width() != width) {
      throw Error(ErrorCode::kGridMismatch, "mask grid differs from the image");
    }
    const auto gray = static_cast<std::uint8_t>(i % 255 + 1);
    masks[i].for_each([&](std::size_t t) { labels[t] = gray; });
  }
  const std::string header = "P5\n" + std::to_string(width) + " " +
                             std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

void render_labelmap_pgm(std::size_t height, std::size_t width,
                         const std::vector<TokenMask>& masks,
                         const std::filesystem::path& path) {
  write_bytes(path, labelmap_pgm_bytes(height, width, masks));
}

Config parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("not JSON: ") + e.what());
  }
  if (!root.is_object()) {
    throw Error(ErrorCode::kInvalidConfig, "config must be a JSON object");
  }
  Config cfg;
  auto number = [&](const std::string& key, double& dst) {
    if (!root.contains(key)) return;
    if (!root[key].is_number()) {
      throw Error(ErrorCode::kInvalidConfig, key + " must be a number");
    }
    dst = root[key].get<double>();
  };
  auto count = [&](const std::string& key, auto& dst) {
    if (!root.contains(key)) return;
    if (!root[key].is_number_integer()) {
      throw Error(ErrorCode::kInvalidConfig, key + " must be an integer");
    }
    const auto v = root[key].get<long long>();
    if (v < 0) throw Error(ErrorCode::kInvalidConfig, key + " must be non-negative");
    dst = static_cast<std::remove_reference_t<decltype(dst)>>(v);
  };
  static const char* const kKnown[] = {
      "sigma",    "thresholds",         "omega_f",      "omega_s",
      "phi",      "dedup_iou",          "spatial_from_level",
      "teacher_temp", "student_temp",   "num_local_views"};
  for (const auto& item : root.items()) {
    bool known = false;
    for (const char* k : kKnown) known = known || item.key() == k;
    if (!known) throw Error(ErrorCode::kInvalidConfig, "unknown key " + item.key());
  }

  number("sigma", cfg.uniap.sigma);
  number("omega_f", cfg.uniap.omega_f);
  number("omega_s", cfg.uniap.omega_s);
  number("dedup_iou", cfg.uniap.dedup_iou);
  count("phi", cfg.uniap.phi);
  count("spatial_from_level", cfg.uniap.spatial_from_level);
  number("teacher_temp", cfg.querysd.teacher_temp);
  number("student_temp", cfg.querysd.student_temp);
  count("num_local_views", cfg.querysd.num_local_views);
  if (root.contains("thresholds")) {
    const json& t = root["thresholds"];
    if (!t.is_array()) {
      throw Error(ErrorCode::kInvalidConfig, "thresholds must be an array");
    }
    cfg.uniap.thresholds.clear();
    for (const json& v : t) {
      if (!v.is_number()) {
        throw Error(ErrorCode::kInvalidConfig, "thresholds must be numbers");
      }
      cfg.uniap.thresholds.push_back(v.get<double>());
    }
  }
  cfg.uniap.validate();
  cfg.querysd.validate();
  return cfg;
}

Config load_config(const std::filesystem::path& path) {
  return parse_config(read_text(path));
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed: " + path.string());
}

}  // namespace uniap::io
