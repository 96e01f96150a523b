#pragma once

#include <json.hpp>

#include <string>

#include "confctrl/backbone.hpp"
#include "confctrl/flow.hpp"
#include "confctrl/scenegen.hpp"

namespace confctrl {

// Ablation variants mirroring the documented flag combinations:
//   full  everything on
//   a     pure-noise initialization (lambda1 = 0)
//   b     uniform confidence (w == 1)
//   c     update submodule removed
//   d     a + c
//   e     gradient regularizer off (lambda_grad = 0)
//   f     prediction conditioned on camera pose only
//   g     additive camera/projection fusion instead of cross-attention
//   h     first-frame-only endpoint conditioning
struct RunConfig {
  SceneSpec scene;
  ModelConfig model;
  FlowConfig flow;
  std::string variant = "full";
  std::string data_dir, checkpoint, report_dir;

  // Applies the variant tag to the model/flow flags. Throws on unknown tags.
  void apply_variant();
};

bool is_known_variant(const std::string& tag);

nlohmann::json to_json(const SceneSpec& s);
nlohmann::json to_json(const ModelConfig& m);
nlohmann::json to_json(const FlowConfig& f);
nlohmann::json to_json(const RunConfig& r);
void from_json_strict(const nlohmann::json& j, SceneSpec& s);
void from_json_strict(const nlohmann::json& j, ModelConfig& m);
void from_json_strict(const nlohmann::json& j, FlowConfig& f);
void from_json_strict(const nlohmann::json& j, RunConfig& r);

}  // namespace confctrl
