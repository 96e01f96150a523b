#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "confctrl/backbone.hpp"
#include "confctrl/checkpoint.hpp"
#include "confctrl/config.hpp"
#include "confctrl/evalmetrics.hpp"
#include "confctrl/flow.hpp"
#include "confctrl/sceneio.hpp"

namespace confctrl {

// Everything the model needs from one scene, on the latent grid.
struct SceneLatents {
  LatentVideo z1;                 // encode of the clean renders
  LatentVideo z_pc;               // encode of the noisy-cloud renders
  std::vector<float> conf_plane;  // T x H' x W', z-buffer confidence resized
  Conditioning<float> cond;
};

SceneLatents prepare_scene(const SceneSample& scene, const ModelConfig& cfg);

// Standard-normal latent drawn from a counter-based stream.
LatentVideo sample_noise(const LatentVideo& like, uint64_t seed, std::string_view tag);

// Writes the endpoint latents back into frames 0 and T-1 (frame 0 only when
// last-frame conditioning is off).
void impose_endpoints(LatentVideo& z, const LatentVideo& z1, bool last_frame_cond);

class Trainer {
 public:
  Trainer(const RunConfig& cfg, std::vector<SceneSample> scenes);

  struct StepStats {
    int64_t step = 0;
    double rf = 0, grad = 0, total = 0, wall_ms = 0;
  };

  // One optimizer step on a single (scene, t, noise) draw; deterministic
  // given the configured seed and the step index.
  StepStats step();

  Backbone<float>& model() { return model_; }
  const Backbone<float>& model() const { return model_; }
  Adam<float>& optimizer() { return opt_; }
  const RunConfig& config() const { return cfg_; }
  int64_t step_index() const { return step_; }
  void set_step_index(int64_t s) { step_ = s; }
  const std::vector<SceneLatents>& latents() const { return latents_; }

 private:
  RunConfig cfg_;
  std::vector<SceneSample> scenes_;
  std::vector<SceneLatents> latents_;
  Backbone<float> model_;
  Adam<float> opt_;
  int64_t step_ = 0;
};

struct TrainLoopOptions {
  int save_every = 0;  // 0 = only at the end
  std::filesystem::path checkpoint_path;
  std::filesystem::path log_path;  // JSONL, one record per step
  bool quiet = false;
  std::function<void(const Trainer::StepStats&)> on_step;
};

// Runs `steps` additional steps. On a non-finite loss the last-good
// checkpoint is kept on disk and NumericalError is rethrown.
void train_loop(Trainer& trainer, int steps, const TrainLoopOptions& opt);

// Euler-samples a video for one scene; decoded frames are clamped to [0,1].
VideoFrames sample_video(const Backbone<float>& model, const SceneLatents& sl,
                         const FlowConfig& flow, uint64_t noise_seed, int steps);

// Returns the final latent as well (endpoint frames exactly imposed).
std::pair<VideoFrames, LatentVideo> sample_video_latent(const Backbone<float>& model,
                                                        const SceneLatents& sl,
                                                        const FlowConfig& flow,
                                                        uint64_t noise_seed, int steps);

nlohmann::json report_to_json(const EvalReport& r);
void write_error_curves_svg(const std::filesystem::path& path, const EvalReport& r);

// ---- ablation matrix ----

struct VariantResult {
  std::string variant;
  std::vector<double> psnr, ssim, e_t, e_r;  // one entry per seed
  double psnr_mean = 0, psnr_std = 0;
  double ssim_mean = 0, ssim_std = 0;
  double e_t_mean = 0, e_t_std = 0;
  double e_r_mean = 0, e_r_std = 0;
};

// Trains and evaluates one variant over the given seeds on the dataset.
VariantResult run_variant(const RunConfig& base, const std::string& variant,
                          const std::vector<uint64_t>& seeds,
                          const std::vector<SceneSample>& scenes);

std::string format_ablation_table(const std::vector<VariantResult>& rows);

}  // namespace confctrl
