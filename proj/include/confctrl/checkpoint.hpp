#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "confctrl/backbone.hpp"
#include "confctrl/flow.hpp"

namespace confctrl {

// Single-archive checkpoint: 8-byte magic, u64 LE manifest length, JSON
// manifest (config, flags, tensor names/shapes/byte offsets), then raw
// little-endian f32 tensor data. Adam moments are stored alongside the
// parameters so training resumes bit-compatibly.
struct Checkpoint {
  ModelConfig config;
  FlowConfig flow;
  int64_t train_step = 0;
  uint64_t init_seed = 0;
  std::string variant = "full";
  std::map<std::string, std::pair<std::vector<int>, std::vector<float>>> tensors;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(const Backbone<float>& model, const Adam<float>& opt,
                           const FlowConfig& flow, int64_t train_step,
                           uint64_t init_seed, const std::string& variant);

// Restores parameter values (and optimizer state) into a model built from
// ck.config. Throws if shapes disagree.
void restore_model(const Checkpoint& ck, Backbone<float>& model, Adam<float>* opt);

}  // namespace confctrl
