#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "confctrl/checkpoint.hpp"
#include "confctrl/config.hpp"
#include "confctrl/pipeline.hpp"
#include "confctrl/pngio.hpp"
#include "confctrl/sceneio.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace confctrl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GlobalOpts {
  uint64_t seed = 0;
  std::string config_path;
  std::string out;
  bool force = false;
  bool quiet = false;
};

RunConfig load_run_config(const GlobalOpts& g) {
  RunConfig cfg;
  if (!g.config_path.empty()) {
    std::ifstream f(g.config_path);
    if (!f) throw DataError("cannot read config file " + g.config_path);
    json j;
    try {
      j = json::parse(f);
      from_json_strict(j, cfg);
    } catch (const json::exception& e) {
      throw DataError("bad config file " + g.config_path + ": " + e.what());
    }
  }
  cfg.flow.seed = g.seed;
  cfg.scene.seed = g.seed;
  return cfg;
}

fs::path require_out(const GlobalOpts& g) {
  if (g.out.empty()) throw CLI::ValidationError("--out", "output directory is required");
  fs::create_directories(g.out);
  return g.out;
}

void write_resolved_config(const fs::path& dir, const RunConfig& cfg) {
  std::ofstream f(dir / "resolved_config.json");
  f << to_json(cfg).dump(2) << "\n";
}

// The model's latent grid always follows the dataset geometry.
void align_model_to_scene(RunConfig& cfg) {
  cfg.model.num_frames = cfg.scene.num_frames;
  cfg.model.latent_channels = 3 * cfg.model.patch * cfg.model.patch;
  if (cfg.scene.height % cfg.model.patch != 0 || cfg.scene.width % cfg.model.patch != 0)
    throw DataError("scene resolution not divisible by the codec patch size");
  cfg.model.latent_height = cfg.scene.height / cfg.model.patch;
  cfg.model.latent_width = cfg.scene.width / cfg.model.patch;
}

std::vector<SceneSample> load_dataset(const fs::path& dir, DatasetManifest* out_manifest) {
  DatasetManifest m;
  try {
    m = read_manifest(dir);
  } catch (const std::exception& e) {
    throw DataError(std::string("cannot read dataset manifest: ") + e.what());
  }
  std::vector<SceneSample> scenes;
  scenes.reserve(size_t(m.num_scenes));
  for (int i = 0; i < m.num_scenes; ++i) {
    try {
      scenes.push_back(read_scene(scene_dir(dir, i)));
    } catch (const std::exception& e) {
      throw DataError("cannot read scene " + std::to_string(i) + ": " + e.what());
    }
  }
  if (out_manifest) *out_manifest = m;
  return scenes;
}

void write_latent(const fs::path& path, const LatentVideo& z) {
  std::ofstream f(path, std::ios::binary);
  f.write("CCLT0001", 8);
  const int32_t dims[6] = {z.t, z.channels, z.height, z.width, z.patch, z.orig_height};
  f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  const int32_t ow = z.orig_width;
  f.write(reinterpret_cast<const char*>(&ow), sizeof(ow));
  f.write(reinterpret_cast<const char*>(z.data.data()),
          std::streamsize(z.data.size() * sizeof(float)));
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

// ---- gen-scenes ----

int cmd_gen_scenes(const GlobalOpts& g, int num, const RunConfig& base) {
  const fs::path out = require_out(g);
  if (fs::exists(out / "manifest.json") && !g.force)
    throw DataError("dataset already exists at " + out.string() + " (use --force)");

  DatasetManifest m;
  m.num_scenes = num;
  m.seed = g.seed;
  m.spec = base.scene;
  write_manifest(out, m);
  for (int i = 0; i < num; ++i) {
    SceneSpec spec = base.scene;
    spec.seed = Rng::derive(g.seed, "scene", uint64_t(i));
    const SceneSample scene = make_scene(spec);
    write_scene(scene_dir(out, i), scene);
    if (!g.quiet) std::fprintf(stderr, "wrote scene %d/%d\n", i + 1, num);
  }
  write_resolved_config(out, base);
  return kExitOk;
}

// ---- train ----

int cmd_train(const GlobalOpts& g, const std::string& data_dir, int steps, int save_every,
              const std::string& variant, const std::string& resume, RunConfig cfg) {
  const fs::path out = require_out(g);
  cfg.data_dir = data_dir;
  cfg.variant = variant;
  cfg.apply_variant();

  DatasetManifest m;
  std::vector<SceneSample> scenes = load_dataset(data_dir, &m);
  if (scenes.empty()) throw DataError("dataset is empty: " + data_dir);
  cfg.scene = m.spec;
  cfg.scene.seed = m.seed;
  align_model_to_scene(cfg);

  const fs::path ck_path = out / "checkpoint.bin";
  if (resume.empty() && fs::exists(ck_path) && !g.force)
    throw DataError("checkpoint already exists at " + ck_path.string() + " (use --force)");

  cfg.checkpoint = ck_path.string();
  Trainer trainer(cfg, std::move(scenes));
  if (!resume.empty()) {
    Checkpoint ck;
    try {
      ck = load_checkpoint(resume);
    } catch (const std::exception& e) {
      throw DataError(std::string("cannot load checkpoint: ") + e.what());
    }
    if (to_json(ck.config).dump() != to_json(cfg.model).dump())
      throw DataError("checkpoint model config does not match the requested run");
    if (ck.variant != cfg.variant)
      throw DataError("checkpoint variant '" + ck.variant + "' does not match '" +
                      cfg.variant + "'");
    restore_model(ck, trainer.model(), &trainer.optimizer());
    trainer.set_step_index(ck.train_step);
    if (!g.quiet) std::fprintf(stderr, "resumed at step %lld\n", (long long)ck.train_step);
  }

  write_resolved_config(out, cfg);
  TrainLoopOptions opt;
  opt.save_every = save_every;
  opt.checkpoint_path = ck_path;
  opt.log_path = out / "train_log.jsonl";
  opt.quiet = g.quiet;
  train_loop(trainer, steps, opt);
  return kExitOk;
}

// ---- sample ----

int cmd_sample(const GlobalOpts& g, const std::string& checkpoint,
               const std::string& data_dir, int scene_index, int steps) {
  const fs::path out = require_out(g);
  Checkpoint ck;
  try {
    ck = load_checkpoint(checkpoint);
  } catch (const std::exception& e) {
    throw DataError(std::string("cannot load checkpoint: ") + e.what());
  }

  DatasetManifest m;
  std::vector<SceneSample> scenes = load_dataset(data_dir, &m);
  if (scene_index < 0 || scene_index >= int(scenes.size()))
    throw DataError("scene index " + std::to_string(scene_index) + " out of range (dataset has " +
                    std::to_string(scenes.size()) + " scenes)");
  const SceneSample& scene = scenes[size_t(scene_index)];

  RunConfig cfg;
  cfg.model = ck.config;
  cfg.flow = ck.flow;
  cfg.variant = ck.variant;
  cfg.scene = scene.spec;
  if (steps > 0) cfg.flow.sample_steps = steps;
  if (cfg.model.num_frames != scene.spec.num_frames ||
      cfg.model.latent_height * cfg.model.patch != scene.spec.height ||
      cfg.model.latent_width * cfg.model.patch != scene.spec.width)
    throw DataError("checkpoint geometry does not match the dataset scenes");

  Backbone<float> model(cfg.model, ck.init_seed);
  restore_model(ck, model, nullptr);

  SceneLatents sl;
  try {
    sl = prepare_scene(scene, cfg.model);
  } catch (const std::exception& e) {
    throw DataError(std::string("scene incompatible with checkpoint: ") + e.what());
  }
  auto [video, latent] =
      sample_video_latent(model, sl, cfg.flow, g.seed, cfg.flow.sample_steps);

  const fs::path frames_dir = out / ("scene_" + std::to_string(scene_index));
  if (fs::exists(frames_dir) && !g.force)
    throw DataError("output already exists at " + frames_dir.string() + " (use --force)");
  fs::create_directories(frames_dir);
  write_video(frames_dir, video);
  write_latent(frames_dir / "latent.bin", latent);
  write_resolved_config(out, cfg);
  if (!g.quiet)
    std::fprintf(stderr, "sampled %d frames -> %s\n", video.t, frames_dir.string().c_str());
  return kExitOk;
}

// ---- eval ----

int cmd_eval(const GlobalOpts& g, const std::string& data_dir, const std::string& videos_dir) {
  const fs::path out = require_out(g);
  DatasetManifest m;
  std::vector<SceneSample> scenes = load_dataset(data_dir, &m);

  json per_scene = json::array();
  std::vector<double> psnrs, ssims, ets, ers;
  for (size_t i = 0; i < scenes.size(); ++i) {
    const fs::path vdir = fs::path(videos_dir) / ("scene_" + std::to_string(i));
    json entry = {{"scene", i}};
    try {
      const VideoFrames video = read_video(vdir);
      if (video.t != scenes[i].spec.num_frames)
        throw DataError("frame count mismatch");
      const EvalReport rep = evaluate_video(video, scenes[i]);
      entry["report"] = report_to_json(rep);
      write_error_curves_svg(out / ("errors_scene_" + std::to_string(i) + ".svg"), rep);
      psnrs.push_back(rep.psnr_mean);
      ssims.push_back(rep.ssim_mean);
      ets.push_back(rep.e_t);
      ers.push_back(rep.e_r);
    } catch (const std::exception& e) {
      entry["error"] = e.what();
    }
    per_scene.push_back(entry);
  }

  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / double(v.size());
  };
  json report = {{"scenes", per_scene},
                 {"num_evaluated", psnrs.size()},
                 {"aggregate",
                  {{"psnr_mean", mean(psnrs)},
                   {"ssim_mean", mean(ssims)},
                   {"e_t_mean", mean(ets)},
                   {"e_r_mean", mean(ers)}}}};
  std::ofstream f(out / "report.json");
  f << report.dump(2) << "\n";
  if (!g.quiet) std::cout << report["aggregate"].dump(2) << "\n";
  if (psnrs.empty()) throw DataError("no scene could be evaluated");
  return kExitOk;
}

// ---- ablate ----

int cmd_ablate(const GlobalOpts& g, const std::string& data_dir,
               const std::string& variants_csv, int num_seeds, int steps, RunConfig base) {
  const fs::path out = require_out(g);
  std::vector<SceneSample> scenes = load_dataset(data_dir, nullptr);
  if (scenes.empty()) throw DataError("dataset is empty: " + data_dir);
  {
    DatasetManifest m = read_manifest(data_dir);
    base.scene = m.spec;
  }
  align_model_to_scene(base);
  if (steps > 0) base.flow.train_steps = steps;

  std::vector<std::string> variants;
  std::stringstream ss(variants_csv);
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (tok.empty()) continue;
    if (!is_known_variant(tok)) throw CLI::ValidationError("--variants", "unknown variant " + tok);
    variants.push_back(tok);
  }
  std::vector<uint64_t> seeds;
  for (int k = 0; k < num_seeds; ++k)
    seeds.push_back(Rng::derive(g.seed, "ablate-seed", uint64_t(k)));

  std::vector<VariantResult> rows;
  json jrows = json::array();
  for (const std::string& v : variants) {
    try {
      VariantResult r = run_variant(base, v, seeds, scenes);
      jrows.push_back({{"variant", r.variant},
                       {"psnr", r.psnr},
                       {"ssim", r.ssim},
                       {"e_t", r.e_t},
                       {"e_r", r.e_r},
                       {"psnr_mean", r.psnr_mean},
                       {"psnr_std", r.psnr_std},
                       {"ssim_mean", r.ssim_mean},
                       {"ssim_std", r.ssim_std},
                       {"e_t_mean", r.e_t_mean},
                       {"e_t_std", r.e_t_std},
                       {"e_r_mean", r.e_r_mean},
                       {"e_r_std", r.e_r_std}});
      rows.push_back(std::move(r));
      if (!g.quiet) std::fprintf(stderr, "variant %s done\n", v.c_str());
    } catch (const std::exception& e) {
      jrows.push_back({{"variant", v}, {"error", e.what()}});
      std::fprintf(stderr, "variant %s failed: %s\n", v.c_str(), e.what());
    }
  }

  const std::string table = format_ablation_table(rows);
  std::cout << table;
  std::ofstream(out / "ablation.json") << jrows.dump(2) << "\n";
  std::ofstream(out / "ablation.txt") << table;
  write_resolved_config(out, base);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Confidence-conditioned video flow model: data, training, sampling, eval"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "global random seed")->capture_default_str();
  app.add_option("--config", g.config_path, "JSON run config (CLI flags override)");
  app.add_option("--out", g.out, "output directory");
  app.add_flag("--force", g.force, "overwrite existing outputs");
  app.add_flag("--quiet", g.quiet, "suppress progress output");

  // gen-scenes
  auto* gen = app.add_subcommand("gen-scenes", "generate a synthetic scene dataset");
  int gen_num = 4;
  double gen_sigma = -1, gen_spread = -1;
  int gen_frames = 0, gen_height = 0, gen_width = 0, gen_points = 0;
  gen->add_option("--num", gen_num, "number of scenes")->capture_default_str();
  gen->add_option("--sigma", gen_sigma, "depth noise sigma");
  gen->add_option("--frames", gen_frames, "frames per scene (odd)");
  gen->add_option("--height", gen_height, "frame height");
  gen->add_option("--width", gen_width, "frame width");
  gen->add_option("--points", gen_points, "points per cloud");
  gen->add_option("--spread", gen_spread, "trajectory spread (radians)");

  // train
  auto* train = app.add_subcommand("train", "train a model on a dataset");
  std::string train_data, train_variant = "full", train_resume;
  int train_steps = 1000, train_save_every = 500;
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--steps", train_steps, "training steps to run")->capture_default_str();
  train->add_option("--save-every", train_save_every, "checkpoint interval")->capture_default_str();
  train->add_option("--variant", train_variant, "ablation variant tag")->capture_default_str();
  train->add_option("--resume", train_resume, "checkpoint to resume from");

  // sample
  auto* sample = app.add_subcommand("sample", "sample a video from a checkpoint");
  std::string sample_ck, sample_data;
  int sample_scene = 0, sample_steps = 0;
  sample->add_option("--checkpoint", sample_ck, "checkpoint file")->required();
  sample->add_option("--data", sample_data, "dataset directory")->required();
  sample->add_option("--scene", sample_scene, "scene index")->capture_default_str();
  sample->add_option("--steps", sample_steps, "integration steps (default: from checkpoint)");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate sampled videos against a dataset");
  std::string eval_data, eval_videos;
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--videos", eval_videos, "directory with scene_<i> video folders")->required();

  // ablate
  auto* ablate = app.add_subcommand("ablate", "train + evaluate ablation variants");
  std::string ab_data, ab_variants = "full,a,b,c,d,e,f,g,h";
  int ab_seeds = 3, ab_steps = 0;
  ablate->add_option("--data", ab_data, "dataset directory")->required();
  ablate->add_option("--variants", ab_variants, "comma-separated variant tags")->capture_default_str();
  ablate->add_option("--seeds", ab_seeds, "seeds per variant")->capture_default_str();
  ablate->add_option("--steps", ab_steps, "training steps per run (default: config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg = load_run_config(g);
    if (*gen) {
      if (gen_sigma >= 0) cfg.scene.depth_noise_sigma = gen_sigma;
      if (gen_spread >= 0) cfg.scene.trajectory_spread = gen_spread;
      if (gen_frames > 0) cfg.scene.num_frames = gen_frames;
      if (gen_height > 0) cfg.scene.height = gen_height;
      if (gen_width > 0) cfg.scene.width = gen_width;
      if (gen_points > 0) cfg.scene.num_points = gen_points;
      cfg.scene.validate();
      return cmd_gen_scenes(g, gen_num, cfg);
    }
    if (*train)
      return cmd_train(g, train_data, train_steps, train_save_every, train_variant,
                       train_resume, cfg);
    if (*sample) return cmd_sample(g, sample_ck, sample_data, sample_scene, sample_steps);
    if (*eval) return cmd_eval(g, eval_data, eval_videos);
    if (*ablate) return cmd_ablate(g, ab_data, ab_variants, ab_seeds, ab_steps, cfg);
    return kExitUsage;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
}
