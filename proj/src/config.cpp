#include "confctrl/config.hpp"

#include <set>
#include <stdexcept>

namespace confctrl {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const char* what) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument(std::string(what) + ": unknown key '" + it.key() + "'");
}

template <typename T>
void opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

bool is_known_variant(const std::string& tag) {
  static const std::set<std::string> tags{"full", "a", "b", "c", "d", "e", "f", "g", "h"};
  return tags.count(tag) > 0;
}

void RunConfig::apply_variant() {
  if (!is_known_variant(variant))
    throw std::invalid_argument("unknown variant tag '" + variant + "'");
  if (variant == "a" || variant == "d") {
    flow.lambda1 = 0.0;
    flow.lambda2 = 1.0;
  }
  if (variant == "b") flow.use_confidence = false;
  if (variant == "c" || variant == "d") model.update_enabled = false;
  if (variant == "e") flow.lambda_grad = 0.0;
  if (variant == "f") model.fusion = FusionMode::kCameraOnly;
  if (variant == "g") model.fusion = FusionMode::kAdditive;
  if (variant == "h") model.last_frame_cond = false;
}

json to_json(const SceneSpec& s) {
  return {{"seed", s.seed},
          {"num_points", s.num_points},
          {"height", s.height},
          {"width", s.width},
          {"num_frames", s.num_frames},
          {"depth_noise_sigma", s.depth_noise_sigma},
          {"conf_sharpness", s.conf_sharpness},
          {"trajectory_spread", s.trajectory_spread},
          {"focal", s.focal}};
}

void from_json_strict(const json& j, SceneSpec& s) {
  check_keys(j, {"seed", "num_points", "height", "width", "num_frames",
                 "depth_noise_sigma", "conf_sharpness", "trajectory_spread", "focal"},
             "scene");
  opt(j, "seed", s.seed);
  opt(j, "num_points", s.num_points);
  opt(j, "height", s.height);
  opt(j, "width", s.width);
  opt(j, "num_frames", s.num_frames);
  opt(j, "depth_noise_sigma", s.depth_noise_sigma);
  opt(j, "conf_sharpness", s.conf_sharpness);
  opt(j, "trajectory_spread", s.trajectory_spread);
  opt(j, "focal", s.focal);
}

namespace {
std::string fusion_name(FusionMode m) {
  switch (m) {
    case FusionMode::kCrossAttention: return "cross_attention";
    case FusionMode::kCameraOnly: return "camera_only";
    case FusionMode::kAdditive: return "additive";
  }
  return "cross_attention";
}
FusionMode fusion_from(const std::string& s) {
  if (s == "cross_attention") return FusionMode::kCrossAttention;
  if (s == "camera_only") return FusionMode::kCameraOnly;
  if (s == "additive") return FusionMode::kAdditive;
  throw std::invalid_argument("unknown fusion mode '" + s + "'");
}
}  // namespace

json to_json(const ModelConfig& m) {
  return {{"embed_dim", m.embed_dim},
          {"num_heads", m.num_heads},
          {"num_backbone_blocks", m.num_backbone_blocks},
          {"num_kalman_blocks", m.num_kalman_blocks},
          {"kalman_insertion_indices", m.kalman_insertion_indices},
          {"diff_blocks_per_update", m.diff_blocks_per_update},
          {"patch", m.patch},
          {"token_patch", m.token_patch},
          {"num_frames", m.num_frames},
          {"latent_channels", m.latent_channels},
          {"latent_height", m.latent_height},
          {"latent_width", m.latent_width},
          {"kalman_enabled", m.kalman_enabled},
          {"update_enabled", m.update_enabled},
          {"fusion", fusion_name(m.fusion)},
          {"queries_from_camera", m.queries_from_camera},
          {"last_frame_cond", m.last_frame_cond}};
}

void from_json_strict(const json& j, ModelConfig& m) {
  check_keys(j,
             {"embed_dim", "num_heads", "num_backbone_blocks", "num_kalman_blocks",
              "kalman_insertion_indices", "diff_blocks_per_update", "patch", "token_patch",
              "num_frames", "latent_channels", "latent_height", "latent_width",
              "kalman_enabled", "update_enabled", "fusion", "queries_from_camera",
              "last_frame_cond"},
             "model");
  opt(j, "embed_dim", m.embed_dim);
  opt(j, "num_heads", m.num_heads);
  opt(j, "num_backbone_blocks", m.num_backbone_blocks);
  opt(j, "num_kalman_blocks", m.num_kalman_blocks);
  opt(j, "kalman_insertion_indices", m.kalman_insertion_indices);
  opt(j, "diff_blocks_per_update", m.diff_blocks_per_update);
  opt(j, "patch", m.patch);
  opt(j, "token_patch", m.token_patch);
  opt(j, "num_frames", m.num_frames);
  opt(j, "latent_channels", m.latent_channels);
  opt(j, "latent_height", m.latent_height);
  opt(j, "latent_width", m.latent_width);
  opt(j, "kalman_enabled", m.kalman_enabled);
  opt(j, "update_enabled", m.update_enabled);
  if (j.contains("fusion")) m.fusion = fusion_from(j.at("fusion").get<std::string>());
  opt(j, "queries_from_camera", m.queries_from_camera);
  opt(j, "last_frame_cond", m.last_frame_cond);
}

json to_json(const FlowConfig& f) {
  return {{"lambda1", f.lambda1},
          {"lambda2", f.lambda2},
          {"lambda_grad", f.lambda_grad},
          {"sample_steps", f.sample_steps},
          {"learning_rate", f.learning_rate},
          {"train_steps", f.train_steps},
          {"seed", f.seed},
          {"renormalize_init", f.renormalize_init},
          {"use_confidence", f.use_confidence}};
}

void from_json_strict(const json& j, FlowConfig& f) {
  check_keys(j,
             {"lambda1", "lambda2", "lambda_grad", "sample_steps", "learning_rate",
              "train_steps", "seed", "renormalize_init", "use_confidence"},
             "flow");
  opt(j, "lambda1", f.lambda1);
  opt(j, "lambda2", f.lambda2);
  opt(j, "lambda_grad", f.lambda_grad);
  opt(j, "sample_steps", f.sample_steps);
  opt(j, "learning_rate", f.learning_rate);
  opt(j, "train_steps", f.train_steps);
  opt(j, "seed", f.seed);
  opt(j, "renormalize_init", f.renormalize_init);
  opt(j, "use_confidence", f.use_confidence);
}

json to_json(const RunConfig& r) {
  return {{"scene", to_json(r.scene)},
          {"model", to_json(r.model)},
          {"flow", to_json(r.flow)},
          {"variant", r.variant},
          {"data_dir", r.data_dir},
          {"checkpoint", r.checkpoint},
          {"report_dir", r.report_dir}};
}

void from_json_strict(const json& j, RunConfig& r) {
  check_keys(j, {"scene", "model", "flow", "variant", "data_dir", "checkpoint", "report_dir"},
             "run config");
  if (j.contains("scene")) from_json_strict(j.at("scene"), r.scene);
  if (j.contains("model")) from_json_strict(j.at("model"), r.model);
  if (j.contains("flow")) from_json_strict(j.at("flow"), r.flow);
  opt(j, "variant", r.variant);
  opt(j, "data_dir", r.data_dir);
  opt(j, "checkpoint", r.checkpoint);
  opt(j, "report_dir", r.report_dir);
  if (!is_known_variant(r.variant))
    throw std::invalid_argument("unknown variant tag '" + r.variant + "'");
}

}  // namespace confctrl
