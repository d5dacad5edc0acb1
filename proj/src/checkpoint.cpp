#include "stavc/checkpoint.hpp"

#include "json.hpp"
#include "stavc/bitstream.hpp"
#include "stavc/codec.hpp"

namespace stavc {

namespace {
constexpr char kCkptMagic[8] = {'S', 'T', 'A', 'V', 'C', 'K', 'P', 'T'};
constexpr uint16_t kCkptVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path, const VideoModel& model,
                     const CheckpointMeta& meta) {
  nlohmann::json j;
  j["config"] = nlohmann::json::parse(meta.config.to_json());
  j["beta"] = meta.beta;
  j["seed"] = meta.seed;
  j["train_steps"] = meta.train_steps;
  std::string mjson = j.dump();

  ByteWriter w;
  w.bytes(kCkptMagic, sizeof(kCkptMagic));
  w.u16(kCkptVersion);
  w.u32(static_cast<uint32_t>(mjson.size()));
  w.str(mjson);
  const auto& items = model.params().items();
  w.u32(static_cast<uint32_t>(items.size()));
  for (const auto& p : items) {
    w.u16(static_cast<uint16_t>(p.name.size()));
    w.str(p.name);
    w.u8(static_cast<uint8_t>(p.tensor.ndim()));
    for (int64_t d : p.tensor.shape()) w.i64(d);
    const auto& v = p.tensor.values();
    w.bytes(v.data(), v.size() * sizeof(double));
  }
  uint32_t crc = crc32(w.data().data(), w.size());
  w.u32(crc);
  write_binary_file(path, w.data());
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::vector<uint8_t> bytes = read_binary_file(path);
  if (bytes.size() < sizeof(kCkptMagic) + 4) throw DataError("checkpoint file too short: " + path);
  uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  if (stored != crc32(bytes.data(), bytes.size() - 4))
    throw DataError("checkpoint checksum mismatch: " + path);
  ByteReader r(bytes.data(), bytes.size() - 4);
  try {
    if (r.str(sizeof(kCkptMagic)) != std::string(kCkptMagic, sizeof(kCkptMagic)))
      throw DataError("not a stavc checkpoint: " + path);
    if (r.u16() != kCkptVersion) throw DataError("unsupported checkpoint version");
    uint32_t mlen = r.u32();
    nlohmann::json j = nlohmann::json::parse(r.str(mlen));

    LoadedCheckpoint lc;
    lc.meta.config = VariantConfig::from_json(j.at("config").dump());
    lc.meta.beta = j.at("beta").get<double>();
    lc.meta.seed = j.at("seed").get<uint64_t>();
    lc.meta.train_steps = j.at("train_steps").get<int64_t>();
    lc.model = std::make_unique<VideoModel>(lc.meta.config, lc.meta.seed);

    uint32_t count = r.u32();
    if (count != lc.model->params().items().size())
      throw DataError("checkpoint parameter count does not match the model");
    for (uint32_t i = 0; i < count; ++i) {
      uint16_t nlen = r.u16();
      std::string name = r.str(nlen);
      uint8_t nd = r.u8();
      Shape shape(nd);
      for (auto& d : shape) d = r.i64();
      if (!lc.model->params().has(name)) throw DataError("unknown parameter in checkpoint: " + name);
      Tensor& t = lc.model->params().at(name);
      if (t.shape() != shape)
        throw DataError("parameter shape mismatch in checkpoint: " + name);
      size_t n = static_cast<size_t>(shape_numel(shape));
      std::vector<uint8_t> raw = r.blob(n * sizeof(double));
      std::memcpy(t.values().data(), raw.data(), raw.size());
    }
    if (r.remaining() != 0) throw DataError("trailing bytes in checkpoint");
    return lc;
  } catch (const CodecError& e) {
    // ByteReader raises CodecError on underrun; surface as a data problem here
    throw DataError(std::string("corrupt checkpoint: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt checkpoint metadata: ") + e.what());
  }
}

}  // namespace stavc
