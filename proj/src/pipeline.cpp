#include "confctrl/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

namespace confctrl {

namespace {

uint64_t model_init_seed(const RunConfig& cfg) {
  return Rng::derive(cfg.flow.seed, "model-init", 0);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0;
  return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double stdev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0;
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size() - 1));
}

}  // namespace

SceneLatents prepare_scene(const SceneSample& scene, const ModelConfig& cfg) {
  SceneLatents sl;
  const int p = cfg.patch;
  if (cfg.latent_channels != 3 * p * p)
    throw std::invalid_argument("prepare_scene: latent_channels must equal 3*patch^2");
  if (scene.spec.num_frames != cfg.num_frames)
    throw std::invalid_argument("prepare_scene: frame count mismatch with model config");

  sl.z1 = resize_latent(encode(frames_to_video(scene.frames), p), cfg.num_frames,
                        cfg.latent_height, cfg.latent_width);

  // noisy-cloud renders at pixel resolution, per ground-truth pose
  std::vector<ProjectionFrame> pc_frames;
  pc_frames.reserve(scene.poses.size());
  for (const auto& pose : scene.poses)
    pc_frames.push_back(project_point_cloud(scene.noisy_cloud, pose, scene.intrinsics));
  sl.z_pc = resize_latent(encode(frames_to_video(pc_frames), p), cfg.num_frames,
                          cfg.latent_height, cfg.latent_width);

  // z-buffer confidence, empty pixels stay 0, resampled onto the latent grid
  const int T = cfg.num_frames;
  const int H = scene.spec.height, W = scene.spec.width;
  std::vector<float> conf_px(size_t(T) * H * W, 0.0f);
  for (int f = 0; f < T; ++f)
    std::copy(pc_frames[f].conf.begin(), pc_frames[f].conf.end(),
              conf_px.begin() + size_t(f) * H * W);
  sl.conf_plane = resize_planes(conf_px, T, 1, H, W, T, cfg.latent_height, cfg.latent_width);
  for (float& v : sl.conf_plane) v = std::clamp(v, 0.0f, 1.0f);

  // conditioning planes
  const size_t plane = size_t(cfg.latent_height) * cfg.latent_width;
  const size_t frame_sz = size_t(cfg.latent_channels) * plane;
  sl.cond.endpoint.assign(size_t(T) * frame_sz, 0.0f);
  sl.cond.mask.assign(size_t(T) * plane, 0.0f);
  sl.cond.z_pc = sl.z_pc.data;

  auto set_endpoint = [&](int f) {
    std::copy(sl.z1.data.begin() + size_t(f) * frame_sz,
              sl.z1.data.begin() + size_t(f + 1) * frame_sz,
              sl.cond.endpoint.begin() + size_t(f) * frame_sz);
    std::fill(sl.cond.mask.begin() + size_t(f) * plane,
              sl.cond.mask.begin() + size_t(f + 1) * plane, 1.0f);
  };
  set_endpoint(0);
  if (cfg.last_frame_cond) set_endpoint(T - 1);

  // ray embedding directly at latent resolution
  const CameraIntrinsics lat_intr = scene.intrinsics.scaled(p);
  sl.cond.plucker.resize(size_t(T) * 6 * plane);
  for (int f = 0; f < T; ++f) {
    const PluckerImage pl = plucker_embedding(scene.poses[f], lat_intr);
    float* dst = sl.cond.plucker.data() + size_t(f) * 6 * plane;
    for (size_t i = 0; i < plane; ++i) {
      for (int a = 0; a < 3; ++a) dst[a * plane + i] = float(pl.directions[i][a]);
      for (int a = 0; a < 3; ++a) dst[(3 + a) * plane + i] = float(pl.moments[i][a]);
    }
  }
  return sl;
}

LatentVideo sample_noise(const LatentVideo& like, uint64_t seed, std::string_view tag) {
  LatentVideo n = LatentVideo::zeros_like(like);
  Rng r(seed, tag);
  for (float& v : n.data) v = float(r.normal());
  return n;
}

void impose_endpoints(LatentVideo& z, const LatentVideo& z1, bool last_frame_cond) {
  if (!z.same_shape(z1)) throw std::invalid_argument("impose_endpoints: shape mismatch");
  const size_t frame_sz = size_t(z.channels) * z.height * z.width;
  std::copy(z1.data.begin(), z1.data.begin() + frame_sz, z.data.begin());
  if (last_frame_cond)
    std::copy(z1.data.end() - std::ptrdiff_t(frame_sz), z1.data.end(),
              z.data.end() - std::ptrdiff_t(frame_sz));
}

Trainer::Trainer(const RunConfig& cfg, std::vector<SceneSample> scenes)
    : cfg_(cfg),
      scenes_(std::move(scenes)),
      model_(cfg.model, model_init_seed(cfg)),
      opt_(AdamConfig{cfg.flow.learning_rate, 0.9, 0.999, 1e-8}) {
  cfg_.model.validate();
  cfg_.flow.validate();
  if (scenes_.empty()) throw std::invalid_argument("trainer: no scenes");
  latents_.reserve(scenes_.size());
  for (const auto& s : scenes_) latents_.push_back(prepare_scene(s, cfg_.model));
}

Trainer::StepStats Trainer::step() {
  const auto t_start = std::chrono::steady_clock::now();
  const ModelConfig& m = cfg_.model;
  const uint64_t seed = cfg_.flow.seed;
  const uint64_t i = uint64_t(step_);

  Rng pick(Rng::derive(seed, "train-pick", i), "pick");
  const SceneLatents& sl = latents_[pick.next_below(latents_.size())];
  const double t = pick.next_double();

  const LatentVideo noise = sample_noise(sl.z1, Rng::derive(seed, "train-noise", i), "noise");
  const LatentVideo z0 = confidence_init(sl.z_pc, sl.conf_plane, noise, cfg_.flow);
  const LatentVideo zt = rf_interpolate(z0, sl.z1, t);

  std::vector<float> target(sl.z1.size());
  for (size_t j = 0; j < target.size(); ++j) target[j] = sl.z1.data[j] - z0.data[j];

  auto v = model_.forward(zt.data, t, sl.cond);
  auto loss = build_loss(v, target, m.num_frames, m.latent_channels, m.latent_height,
                         m.latent_width, cfg_.flow);
  StepStats st;
  st.step = step_;
  st.rf = double(loss.rf.val()[0]);
  st.grad = double(loss.grad.val()[0]);
  st.total = double(loss.total.val()[0]);
  if (!std::isfinite(st.total))
    throw NumericalError("non-finite loss at step " + std::to_string(step_));

  ad::backward(loss.total);
  for (const auto& [name, param] : model_.params())
    for (float g : param.grad())
      if (!std::isfinite(g))
        throw NumericalError("non-finite gradient in " + name + " at step " +
                             std::to_string(step_));
  opt_.step(model_.params());
  ++step_;
  st.wall_ms = std::chrono::duration<double, std::milli>(
                   std::chrono::steady_clock::now() - t_start)
                   .count();
  return st;
}

void train_loop(Trainer& trainer, int steps, const TrainLoopOptions& opt) {
  std::ofstream log;
  if (!opt.log_path.empty()) {
    log.open(opt.log_path, std::ios::app);
    if (!log) throw std::runtime_error("cannot open training log " + opt.log_path.string());
  }
  auto save = [&] {
    if (opt.checkpoint_path.empty()) return;
    const auto ck =
        make_checkpoint(trainer.model(), trainer.optimizer(), trainer.config().flow,
                        trainer.step_index(), model_init_seed(trainer.config()),
                        trainer.config().variant);
    save_checkpoint(opt.checkpoint_path, ck);
  };

  for (int n = 0; n < steps; ++n) {
    Trainer::StepStats st;
    try {
      st = trainer.step();
    } catch (const NumericalError&) {
      // parameters have not been touched by the failing step
      save();
      throw;
    }
    if (log) {
      nlohmann::json rec = {{"step", st.step},
                            {"rf_loss", st.rf},
                            {"grad_loss", st.grad},
                            {"total", st.total},
                            {"wall_ms", st.wall_ms}};
      log << rec.dump() << "\n";
    }
    if (!opt.quiet && (st.step % 100 == 0 || n + 1 == steps))
      std::fprintf(stderr, "step %6lld  rf %.6f  grad %.6f  total %.6f\n",
                   (long long)st.step, st.rf, st.grad, st.total);
    if (opt.on_step) opt.on_step(st);
    if (opt.save_every > 0 && (st.step + 1) % opt.save_every == 0) save();
  }
  save();
  if (log) log.flush();
}

std::pair<VideoFrames, LatentVideo> sample_video_latent(const Backbone<float>& model,
                                                        const SceneLatents& sl,
                                                        const FlowConfig& flow,
                                                        uint64_t noise_seed, int steps) {
  const bool last = model.config().last_frame_cond;
  const LatentVideo noise = sample_noise(sl.z_pc, noise_seed, "sample-noise");
  LatentVideo z = confidence_init(sl.z_pc, sl.conf_plane, noise, flow);
  impose_endpoints(z, sl.z1, last);

  auto vel = [&](const LatentVideo& zc, double t) {
    return model.velocity(zc.data, t, sl.cond);
  };
  z = euler_sample(z, steps, vel,
                   [&](LatentVideo& zc) { impose_endpoints(zc, sl.z1, last); });
  for (float v : z.data)
    if (!std::isfinite(v)) throw NumericalError("non-finite latent after sampling");

  VideoFrames frames = decode(z);
  for (float& v : frames.data) v = std::clamp(v, 0.0f, 1.0f);
  return {std::move(frames), std::move(z)};
}

VideoFrames sample_video(const Backbone<float>& model, const SceneLatents& sl,
                         const FlowConfig& flow, uint64_t noise_seed, int steps) {
  return sample_video_latent(model, sl, flow, noise_seed, steps).first;
}

nlohmann::json report_to_json(const EvalReport& r) {
  return {{"psnr_per_frame", r.psnr_per_frame},
          {"ssim_per_frame", r.ssim_per_frame},
          {"psnr_mean", r.psnr_mean},
          {"ssim_mean", r.ssim_mean},
          {"psnr_mid_mean", r.psnr_mid_mean},
          {"e_t", r.e_t},
          {"e_r", r.e_r},
          {"per_frame_trans_err", r.per_frame_trans_err},
          {"per_frame_rot_err", r.per_frame_rot_err},
          {"unreliable", std::vector<int>(r.unreliable.begin(), r.unreliable.end())}};
}

void write_error_curves_svg(const std::filesystem::path& path, const EvalReport& r) {
  const int W = 640, H = 360, ml = 60, mr = 20, mt = 20, mb = 40;
  const int n = int(r.per_frame_trans_err.size());
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  auto curve = [&](const std::vector<double>& v, const char* color, const char* label,
                   int label_y) {
    if (v.empty()) return;
    double vmax = 1e-9;
    for (double x : v) vmax = std::max(vmax, x);
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (int i = 0; i < int(v.size()); ++i) {
      const double px = ml + (v.size() > 1 ? double(i) / double(v.size() - 1) : 0.5) *
                                 (W - ml - mr);
      const double py = H - mb - (v[i] / vmax) * (H - mt - mb);
      s << px << "," << py << " ";
    }
    s << "\"/>\n<text x=\"" << ml + 6 << "\" y=\"" << label_y << "\" fill=\"" << color
      << "\">" << label << " (max " << vmax << ")</text>\n";
  };
  s << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
    << H - mb << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
    << "\" stroke=\"black\"/>\n"
    << "<text x=\"" << (W / 2) << "\" y=\"" << H - 10 << "\">frame (0.." << n - 1
    << ")</text>\n";
  curve(r.per_frame_trans_err, "#c0392b", "translation error", mt + 16);
  curve(r.per_frame_rot_err, "#2980b9", "rotation error [rad]", mt + 34);
  s << "</svg>\n";

  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << s.str();
}

VariantResult run_variant(const RunConfig& base, const std::string& variant,
                          const std::vector<uint64_t>& seeds,
                          const std::vector<SceneSample>& scenes) {
  VariantResult res;
  res.variant = variant;
  for (uint64_t seed : seeds) {
    RunConfig cfg = base;
    cfg.variant = variant;
    cfg.apply_variant();
    cfg.flow.seed = seed;

    Trainer trainer(cfg, scenes);
    TrainLoopOptions opt;
    opt.quiet = true;
    train_loop(trainer, cfg.flow.train_steps, opt);

    std::vector<double> psnrs, ssims, ets, ers;
    for (size_t si = 0; si < scenes.size(); ++si) {
      const VideoFrames video =
          sample_video(trainer.model(), trainer.latents()[si], cfg.flow,
                       Rng::derive(seed, "eval-noise", si), cfg.flow.sample_steps);
      const EvalReport rep = evaluate_video(video, scenes[si]);
      psnrs.push_back(rep.psnr_mid_mean);
      ssims.push_back(rep.ssim_mean);
      ets.push_back(rep.e_t);
      ers.push_back(rep.e_r);
    }
    res.psnr.push_back(mean_of(psnrs));
    res.ssim.push_back(mean_of(ssims));
    res.e_t.push_back(mean_of(ets));
    res.e_r.push_back(mean_of(ers));
  }
  res.psnr_mean = mean_of(res.psnr);
  res.psnr_std = stdev_of(res.psnr);
  res.ssim_mean = mean_of(res.ssim);
  res.ssim_std = stdev_of(res.ssim);
  res.e_t_mean = mean_of(res.e_t);
  res.e_t_std = stdev_of(res.e_t);
  res.e_r_mean = mean_of(res.e_r);
  res.e_r_std = stdev_of(res.e_r);
  return res;
}

std::string format_ablation_table(const std::vector<VariantResult>& rows) {
  std::ostringstream s;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-8s %18s %18s %18s %18s\n", "variant",
                "psnr_mid [dB]", "ssim", "E_t", "E_r [rad]");
  s << buf;
  s << std::string(8 + 4 * 19, '-') << "\n";
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf),
                  "%-8s %9.3f +-%6.3f %9.4f +-%6.4f %9.4f +-%6.4f %9.4f +-%6.4f\n",
                  r.variant.c_str(), r.psnr_mean, r.psnr_std, r.ssim_mean, r.ssim_std,
                  r.e_t_mean, r.e_t_std, r.e_r_mean, r.e_r_std);
    s << buf;
  }
  return s.str();
}

}  // namespace confctrl
