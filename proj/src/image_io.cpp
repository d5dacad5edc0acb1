#include "stavc/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "stavc/codec.hpp"

namespace fs = std::filesystem;

namespace stavc {

namespace {

Tensor from_u8(const std::vector<uint8_t>& px, int64_t C, int64_t H, int64_t W,
               int64_t keep_channels) {
  // px is interleaved (H,W,C); output is planar [keep,H,W], k -> k/255
  std::vector<double> v(static_cast<size_t>(keep_channels * H * W));
  for (int64_t i = 0; i < H; ++i)
    for (int64_t j = 0; j < W; ++j)
      for (int64_t c = 0; c < keep_channels; ++c)
        v[(c * H + i) * W + j] = static_cast<double>(px[(i * W + j) * C + c]) / 255.0;
  return Tensor::from_data({keep_channels, H, W}, std::move(v));
}

Tensor load_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P6" && magic != "P5") throw DataError("unsupported PNM type in " + path);
  auto next_int = [&]() {
    // skips whitespace and '#' comments
    while (true) {
      int ch = in.peek();
      if (ch == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(ch)) {
        in.get();
      } else {
        break;
      }
    }
    int64_t v;
    if (!(in >> v)) throw DataError("malformed PNM header in " + path);
    return v;
  };
  int64_t W = next_int(), H = next_int(), maxval = next_int();
  if (maxval != 255) throw DataError("unsupported bit depth (maxval " + std::to_string(maxval) +
                                     ") in " + path);
  in.get();  // single whitespace after header
  int64_t C = magic == "P6" ? 3 : 1;
  std::vector<uint8_t> px(static_cast<size_t>(H * W * C));
  in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (in.gcount() != static_cast<std::streamsize>(px.size()))
    throw DataError("truncated PNM data in " + path);
  return from_u8(px, C, H, W, C);
}

// minimal PNG reader: 8-bit gray/RGB/with-alpha, non-interlaced
Tensor load_png(const std::string& path) {
  std::vector<uint8_t> f = read_binary_file(path);
  static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  if (f.size() < 8 || std::memcmp(f.data(), sig, 8) != 0)
    throw DataError("not a PNG file: " + path);
  size_t pos = 8;
  auto be32 = [&](size_t p) {
    return (uint32_t(f[p]) << 24) | (uint32_t(f[p + 1]) << 16) | (uint32_t(f[p + 2]) << 8) |
           uint32_t(f[p + 3]);
  };
  int64_t W = 0, H = 0;
  int bit_depth = 0, color_type = 0;
  std::vector<uint8_t> idat;
  bool done = false;
  while (!done) {
    if (pos + 8 > f.size()) throw DataError("truncated PNG: " + path);
    uint32_t len = be32(pos);
    std::string type(reinterpret_cast<const char*>(f.data() + pos + 4), 4);
    size_t data = pos + 8;
    if (data + len + 4 > f.size()) throw DataError("truncated PNG chunk: " + path);
    if (type == "IHDR") {
      W = be32(data);
      H = be32(data + 4);
      bit_depth = f[data + 8];
      color_type = f[data + 9];
      if (f[data + 10] != 0 || f[data + 11] != 0) throw DataError("unsupported PNG compression");
      if (f[data + 12] != 0) throw DataError("interlaced PNG not supported: " + path);
      if (bit_depth != 8)
        throw DataError("unsupported bit depth (" + std::to_string(bit_depth) + ") in " + path);
      if (color_type == 3) throw DataError("palette PNG not supported: " + path);
    } else if (type == "IDAT") {
      idat.insert(idat.end(), f.begin() + data, f.begin() + data + len);
    } else if (type == "IEND") {
      done = true;
    }
    pos = data + len + 4;  // skip crc
  }
  if (W < 1 || H < 1 || idat.empty()) throw DataError("empty PNG: " + path);
  int64_t C = color_type == 0 ? 1 : color_type == 2 ? 3 : color_type == 4 ? 2 : 4;

  uLongf raw_size = static_cast<uLongf>(H * (1 + W * C));
  std::vector<uint8_t> raw(raw_size);
  uLongf got = raw_size;
  int zrc = uncompress(raw.data(), &got, idat.data(), static_cast<uLong>(idat.size()));
  if (zrc != Z_OK || got != raw_size) throw DataError("PNG inflate failed: " + path);

  // undo per-row filters
  std::vector<uint8_t> px(static_cast<size_t>(H * W * C));
  int64_t stride = W * C;
  for (int64_t y = 0; y < H; ++y) {
    uint8_t filter = raw[y * (stride + 1)];
    const uint8_t* src = raw.data() + y * (stride + 1) + 1;
    uint8_t* dst = px.data() + y * stride;
    const uint8_t* up = y > 0 ? px.data() + (y - 1) * stride : nullptr;
    for (int64_t i = 0; i < stride; ++i) {
      int a = i >= C ? dst[i - C] : 0;
      int b = up ? up[i] : 0;
      int c = (up && i >= C) ? up[i - C] : 0;
      int x = src[i];
      switch (filter) {
        case 0: break;
        case 1: x += a; break;
        case 2: x += b; break;
        case 3: x += (a + b) / 2; break;
        case 4: {
          int p = a + b - c;
          int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
          x += (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
          break;
        }
        default: throw DataError("bad PNG filter byte in " + path);
      }
      dst[i] = static_cast<uint8_t>(x);
    }
  }
  int64_t keep = C >= 3 ? 3 : 1;
  return from_u8(px, C, H, W, keep);
}

bool has_ext(const fs::path& p, const char* ext) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e == ext;
}

// first integer appearing in the stem, for numeric frame ordering
int64_t stem_number(const fs::path& p) {
  std::string s = p.stem().string();
  size_t i = 0;
  while (i < s.size() && !std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i == s.size()) return -1;
  int64_t v = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])))
    v = v * 10 + (s[i++] - '0');
  return v;
}

Clip load_raw_planar(const std::string& path) {
  std::string sidecar = path + ".json";
  std::ifstream meta(sidecar);
  if (!meta) throw DataError("missing sidecar " + sidecar + " for raw planar input");
  nlohmann::json j;
  try {
    meta >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad sidecar JSON: ") + e.what());
  }
  int64_t W = j.at("width").get<int64_t>();
  int64_t H = j.at("height").get<int64_t>();
  int64_t C = j.at("channels").get<int64_t>();
  int64_t T = j.at("frames").get<int64_t>();
  if (W < 1 || H < 1 || C < 1 || T < 1) throw DataError("bad dimensions in " + sidecar);
  std::vector<uint8_t> raw = read_binary_file(path);
  if (static_cast<int64_t>(raw.size()) != T * C * H * W)
    throw DataError("raw file size does not match sidecar dims: " + path);
  Clip clip;
  for (int64_t t = 0; t < T; ++t) {
    std::vector<double> v(static_cast<size_t>(C * H * W));
    const uint8_t* p = raw.data() + t * C * H * W;
    for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(p[i]) / 255.0;
    clip.push_back(Tensor::from_data({C, H, W}, std::move(v)));
  }
  return clip;
}

}  // namespace

Tensor load_image(const std::string& path) {
  fs::path p(path);
  if (has_ext(p, ".ppm") || has_ext(p, ".pgm")) return load_pnm(path);
  if (has_ext(p, ".png")) return load_png(path);
  throw DataError("unsupported image format: " + path);
}

void save_image_ppm(const std::string& path, const Tensor& img) {
  if (img.ndim() != 3) throw UsageError("save_image_ppm expects [C,H,W]");
  int64_t C = img.dim(0), H = img.dim(1), W = img.dim(2);
  if (C != 1 && C != 3) throw UsageError("save_image_ppm supports 1 or 3 channels");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write image: " + path);
  out << (C == 3 ? "P6\n" : "P5\n") << W << " " << H << "\n255\n";
  std::vector<uint8_t> row(static_cast<size_t>(W * C));
  const auto& v = img.values();
  for (int64_t i = 0; i < H; ++i) {
    for (int64_t j = 0; j < W; ++j)
      for (int64_t c = 0; c < C; ++c) {
        double x = std::clamp(v[(c * H + i) * W + j], 0.0, 1.0);
        row[j * C + c] = static_cast<uint8_t>(std::lround(x * 255.0));
      }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

Clip load_frames(const std::string& path) {
  fs::path p(path);
  if (fs::is_regular_file(p)) {
    if (has_ext(p, ".raw")) return load_raw_planar(path);
    throw DataError("expected a frame directory or .raw planar file: " + path);
  }
  if (!fs::is_directory(p)) throw DataError("no such input: " + path);

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(p)) {
    if (!e.is_regular_file()) continue;
    if (has_ext(e.path(), ".ppm") || has_ext(e.path(), ".pgm") || has_ext(e.path(), ".png"))
      files.push_back(e.path());
  }
  if (files.empty()) throw DataError("no frames found in " + path);
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    int64_t na = stem_number(a), nb = stem_number(b);
    if (na != nb) return na < nb;
    return a.filename().string() < b.filename().string();
  });

  Clip clip;
  for (const auto& f : files) {
    Tensor img = load_image(f.string());
    if (!clip.empty() && img.shape() != clip[0].shape())
      throw DataError("frame size mismatch at " + f.string());
    clip.push_back(std::move(img));
  }
  return clip;
}

void save_frames_ppm(const std::string& dir, const Clip& clip, const std::string& prefix) {
  fs::create_directories(dir);
  char name[64];
  for (size_t t = 0; t < clip.size(); ++t) {
    std::snprintf(name, sizeof(name), "%s_%05zu.ppm", prefix.c_str(), t);
    save_image_ppm((fs::path(dir) / name).string(), clip[t]);
  }
}

void save_raw_planar(const std::string& path, const Clip& clip) {
  if (clip.empty()) throw UsageError("empty clip");
  int64_t C = clip[0].dim(0), H = clip[0].dim(1), W = clip[0].dim(2);
  std::vector<uint8_t> raw;
  raw.reserve(clip.size() * static_cast<size_t>(C * H * W));
  for (const auto& f : clip) {
    if (f.shape() != clip[0].shape()) throw UsageError("clip frames disagree on shape");
    for (double x : f.values())
      raw.push_back(static_cast<uint8_t>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0)));
  }
  write_binary_file(path, raw);
  nlohmann::json j;
  j["width"] = W;
  j["height"] = H;
  j["channels"] = C;
  j["frames"] = static_cast<int64_t>(clip.size());
  std::ofstream meta(path + ".json", std::ios::trunc);
  meta << j.dump(2) << "\n";
}

}  // namespace stavc
