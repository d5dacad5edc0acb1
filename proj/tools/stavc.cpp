#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "stavc/checkpoint.hpp"
#include "stavc/codec.hpp"
#include "stavc/image_io.hpp"
#include "stavc/metrics.hpp"
#include "stavc/scale_space.hpp"
#include "stavc/train.hpp"

namespace fs = std::filesystem;
using namespace stavc;

namespace {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void check_variant_flag(const std::string& flag, const CheckpointMeta& meta) {
  if (flag.empty()) return;
  if (variant_from_name(flag) != meta.config.variant)
    throw UsageError("requested variant '" + flag + "' does not match checkpoint variant '" +
                     std::string(variant_name(meta.config.variant)) + "'");
}

void dump_volume_levels(const Clip& clip, const VariantConfig& cfg, const std::string& dir) {
  fs::create_directories(dir);
  NoGradGuard ng;
  Tensor frame = pad_frame_to16(clip[0]);
  ScaleSpaceVolume vol = build_scale_space_volume(frame, cfg.sigma0, cfg.scale_depth);
  char name[64];
  for (size_t k = 0; k < vol.levels.size(); ++k) {
    std::snprintf(name, sizeof(name), "level_%02zu.ppm", k);
    save_image_ppm((fs::path(dir) / name).string(), vol.levels[k]);
  }
  std::printf("wrote %zu scale-space levels to %s\n", vol.levels.size(), dir.c_str());
}

SyntheticSource::Texture texture_from_name(const std::string& s) {
  if (s == "smooth") return SyntheticSource::Texture::Smooth;
  if (s == "checker") return SyntheticSource::Texture::Checker;
  if (s == "noise") return SyntheticSource::Texture::Noise;
  throw UsageError("unknown texture kind: " + s + " (expected smooth|checker|noise)");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void cmd_train(const std::string& config_path, const std::string& output,
               const std::string& curve, const std::string& snapshots, int64_t steps_override,
               double beta_override, const std::string& variant_override, int64_t seed_override) {
  TrainConfig cfg =
      config_path.empty() ? TrainConfig() : TrainConfig::from_json(read_text_file(config_path));
  if (steps_override > 0) cfg.steps = steps_override;
  if (beta_override > 0) cfg.beta = beta_override;
  if (!variant_override.empty()) cfg.model.variant = variant_from_name(variant_override);
  if (seed_override >= 0) {
    cfg.seed = static_cast<uint64_t>(seed_override);
    cfg.source.seed = cfg.seed;
  }
  cfg.validate();

  VideoModel model(cfg.model, cfg.seed);
  std::printf("training %s%s: %lld steps, beta %g, crop %d, batch %d, %lld parameters\n",
              variant_name(cfg.model.variant), cfg.model.structured_prior ? "-sp" : "",
              static_cast<long long>(cfg.steps), cfg.beta, cfg.crop, cfg.batch,
              static_cast<long long>(model.params().total_count()));
  TrainResult r = train(model, cfg, curve, snapshots);
  std::printf("loss %.5f -> %.5f\n", r.initial_loss, r.final_loss);

  CheckpointMeta meta;
  meta.config = cfg.model;
  meta.beta = cfg.beta;
  meta.seed = cfg.seed;
  meta.train_steps = cfg.steps;
  save_checkpoint(output, model, meta);
  std::printf("checkpoint written to %s\n", output.c_str());
}

void cmd_encode(const std::string& input, const std::string& ckpt_path, const std::string& output,
                const std::string& variant_flag, const std::string& dump_volume) {
  LoadedCheckpoint lc = load_checkpoint(ckpt_path);
  check_variant_flag(variant_flag, lc.meta);
  Clip clip = load_frames(input);
  if (!dump_volume.empty()) dump_volume_levels(clip, lc.meta.config, dump_volume);
  VideoEncode enc = encode_video(*lc.model, clip, lc.meta.beta);
  std::vector<uint8_t> bytes = enc.stream.serialize();
  write_binary_file(output, bytes);
  int64_t H = clip[0].dim(1), W = clip[0].dim(2);
  std::printf("encoded %zu frames (%lldx%lld) to %s: %zu bytes, %.4f bpp (estimate %.4f)\n",
              clip.size(), static_cast<long long>(W), static_cast<long long>(H), output.c_str(),
              bytes.size(), bpp(bytes.size(), static_cast<int64_t>(clip.size()), H, W),
              enc.est_bits / static_cast<double>(static_cast<int64_t>(clip.size()) * H * W));
}

void cmd_decode(const std::string& input, const std::string& ckpt_path, const std::string& output,
                const std::string& variant_flag) {
  LoadedCheckpoint lc = load_checkpoint(ckpt_path);
  check_variant_flag(variant_flag, lc.meta);
  Bitstream stream = Bitstream::parse(read_binary_file(input));
  Clip frames = decode_video(*lc.model, stream);
  save_frames_ppm(output, frames, "frame");
  std::printf("decoded %zu frames to %s\n", frames.size(), output.c_str());
}

void cmd_eval(const std::string& input, const std::string& ckpt_path, const std::string& report,
              const std::string& csv, const std::string& dataset) {
  LoadedCheckpoint lc = load_checkpoint(ckpt_path);
  Clip clip = load_frames(input);
  EvalReport rep = evaluate_model(*lc.model, lc.meta, clip, dataset);
  const RDPoint& p = rep.points.at(0);
  std::printf("%s beta=%g: %.4f bpp, %.2f dB over %lld frames (%.2fs)\n", p.variant.c_str(),
              p.beta, p.bpp, p.psnr, static_cast<long long>(p.frames), p.seconds);
  if (!report.empty()) {
    std::ofstream out(report, std::ios::trunc);
    out << rep.to_json() << "\n";
  }
  if (!csv.empty()) {
    std::ofstream out(csv, std::ios::trunc);
    out << rd_points_csv(rep.points);
  }
}

void cmd_sweep(const std::string& checkpoints, const std::string& input,
               const std::string& output, const std::string& dataset) {
  std::vector<std::string> paths = split_list(checkpoints);
  if (paths.empty()) throw UsageError("no checkpoints given");
  Clip clip = load_frames(input);
  std::vector<RDPoint> points = rd_sweep(paths, clip, dataset);
  std::string csv = rd_points_csv(points);
  std::ofstream out(output, std::ios::trunc);
  if (!out) throw DataError("cannot write " + output);
  out << csv;
  std::printf("%s", csv.c_str());
}

void cmd_gen_data(const std::string& output, int frames, int width, int height, int64_t seed,
                  int sprites, int velocity, const std::string& texture, double blur_prob,
                  double occl_prob, const std::string& raw_out) {
  SyntheticSource src;
  src.width = width;
  src.height = height;
  src.sprite_count = sprites;
  src.velocity_max = velocity;
  src.texture = texture_from_name(texture);
  src.blur_event_prob = blur_prob;
  src.occlusion_prob = occl_prob;
  src.seed = static_cast<uint64_t>(seed);
  GeneratedClip g = generate_clip(src, frames);
  if (!raw_out.empty()) {
    save_raw_planar(raw_out, g.frames);
    std::printf("wrote %d raw frames to %s (+.json sidecar)\n", frames, raw_out.c_str());
  }
  if (!output.empty()) {
    save_frames_ppm(output, g.frames, "frame");
    std::printf("wrote %d frames to %s (camera motion %d,%d)\n", frames, output.c_str(), g.cam_dx,
                g.cam_dy);
  }
}

void cmd_compare_external(const std::string& input, const std::string& qualities,
                          const std::string& output, const std::string& workdir) {
  Clip clip = load_frames(input);
  std::vector<int> qs;
  for (const auto& s : split_list(qualities)) qs.push_back(std::stoi(s));
  ExternalCodecResult r = external_codec_harness(clip, qs, workdir);
  if (!r.available) {
    std::printf("external codec: %s\n", r.status.c_str());
    return;
  }
  std::string csv = rd_points_csv(r.points);
  if (!output.empty()) {
    std::ofstream out(output, std::ios::trunc);
    out << csv;
  }
  std::printf("%s", csv.c_str());
  if (r.status != "ok") std::printf("status: %s\n", r.status.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stavc: learned low-latency video codec"};
  app.require_subcommand(1);

  auto* t = app.add_subcommand("train", "train a model on the synthetic source");
  std::string t_config, t_output = "model.ckpt", t_curve, t_variant, t_snapshots;
  int64_t t_steps = -1, t_seed = -1;
  double t_beta = -1;
  t->add_option("--config", t_config, "train config JSON");
  t->add_option("--output", t_output, "checkpoint path")->required();
  t->add_option("--curve", t_curve, "loss curve CSV path");
  t->add_option("--snapshots", t_snapshots, "prefix for periodic checkpoints");
  t->add_option("--steps", t_steps, "override step count");
  t->add_option("--beta", t_beta, "override rate weight");
  t->add_option("--variant", t_variant, "override variant (tat|ssf|stat|stat-ssf)");
  t->add_option("--seed", t_seed, "override seed");

  auto* e = app.add_subcommand("encode", "encode frames to a bitstream");
  std::string e_input, e_ckpt, e_output, e_variant, e_dump;
  e->add_option("--input", e_input, "frame directory or .raw planar file")->required();
  e->add_option("--checkpoint", e_ckpt, "model checkpoint")->required();
  e->add_option("--output", e_output, "bitstream path")->required();
  e->add_option("--variant", e_variant, "expected variant (must match checkpoint)");
  e->add_option("--dump-volume", e_dump, "debug: dump scale-space levels of frame 0 here");

  auto* d = app.add_subcommand("decode", "decode a bitstream to frames");
  std::string d_input, d_ckpt, d_output, d_variant;
  d->add_option("--input", d_input, "bitstream path")->required();
  d->add_option("--checkpoint", d_ckpt, "model checkpoint")->required();
  d->add_option("--output", d_output, "output frame directory")->required();
  d->add_option("--variant", d_variant, "expected variant (must match checkpoint)");

  auto* v = app.add_subcommand("eval", "encode+decode+measure one checkpoint");
  std::string v_input, v_ckpt, v_report, v_csv, v_dataset = "local";
  v->add_option("--input", v_input, "frame directory or .raw file")->required();
  v->add_option("--checkpoint", v_ckpt, "model checkpoint")->required();
  v->add_option("--report", v_report, "write JSON report here");
  v->add_option("--csv", v_csv, "write CSV point here");
  v->add_option("--dataset", v_dataset, "dataset id for the report");

  auto* s = app.add_subcommand("sweep", "rate-distortion sweep over checkpoints");
  std::string s_ckpts, s_input, s_output, s_dataset = "local";
  s->add_option("--checkpoints", s_ckpts, "comma-separated checkpoint list")->required();
  s->add_option("--input", s_input, "frame directory or .raw file")->required();
  s->add_option("--output", s_output, "CSV output path")->required();
  s->add_option("--dataset", s_dataset, "dataset id");

  auto* g = app.add_subcommand("gen-data", "generate a synthetic clip");
  std::string g_output, g_texture = "smooth", g_raw;
  int g_frames = 10, g_width = 64, g_height = 64, g_sprites = 3, g_velocity = 2;
  int64_t g_seed = 0;
  double g_blur = 0.2, g_occl = 0.2;
  g->add_option("--output", g_output, "output frame directory");
  g->add_option("--raw", g_raw, "also write a raw planar file here");
  g->add_option("--frames", g_frames, "frame count");
  g->add_option("--width", g_width, "frame width");
  g->add_option("--height", g_height, "frame height");
  g->add_option("--seed", g_seed, "generator seed");
  g->add_option("--sprites", g_sprites, "independently moving sprites");
  g->add_option("--velocity", g_velocity, "max |velocity| in pixels/frame");
  g->add_option("--texture", g_texture, "smooth|checker|noise");
  g->add_option("--blur-prob", g_blur, "probability of a progressive blur event");
  g->add_option("--occlusion-prob", g_occl, "probability of appear/vanish events");

  auto* x = app.add_subcommand("compare-external", "RD points from a system encoder");
  std::string x_input, x_qualities = "24,30,36", x_output, x_workdir = "/tmp/stavc-external";
  x->add_option("--input", x_input, "frame directory")->required();
  x->add_option("--qualities", x_qualities, "comma-separated crf values");
  x->add_option("--output", x_output, "CSV output path");
  x->add_option("--workdir", x_workdir, "scratch directory");

  try {
    app.parse(argc, argv);
    if (*t) cmd_train(t_config, t_output, t_curve, t_snapshots, t_steps, t_beta, t_variant,
                      t_seed);
    if (*e) cmd_encode(e_input, e_ckpt, e_output, e_variant, e_dump);
    if (*d) cmd_decode(d_input, d_ckpt, d_output, d_variant);
    if (*v) cmd_eval(v_input, v_ckpt, v_report, v_csv, v_dataset);
    if (*s) cmd_sweep(s_ckpts, s_input, s_output, s_dataset);
    if (*g) cmd_gen_data(g_output, g_frames, g_width, g_height, g_seed, g_sprites, g_velocity,
                         g_texture, g_blur, g_occl, g_raw);
    if (*x) cmd_compare_external(x_input, x_qualities, x_output, x_workdir);
    return 0;
  } catch (const CLI::ParseError& err) {
    int rc = app.exit(err);
    return rc == 0 ? 0 : 2;
  } catch (const UsageError& err) {
    std::fprintf(stderr, "%s\n", err.what());
    return 2;
  } catch (const DataError& err) {
    std::fprintf(stderr, "%s\n", err.what());
    return 3;
  } catch (const CodecError& err) {
    std::fprintf(stderr, "%s\n", err.what());
    return 4;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
}
