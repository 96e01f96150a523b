#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "confctrl/latentcodec.hpp"
#include "confctrl/scenegen.hpp"

namespace confctrl {

// On-disk scene layout (one directory per scene):
//   meta.json    resolution, frame count, intrinsics, seed, sigma, ...
//   poses.json   T row-major 4x4 world-to-camera matrices
//   frames/frame_%04d.png
//   cloud.bin    "CONFPC01" magic + u64 count, then f32 LE x,y,z,r,g,b,conf
//                records; clean cloud first, then the noisy cloud appended
//                as a second block with its own header
//   corr.json    world points with per-frame pixel tracks

void write_scene(const std::filesystem::path& dir, const SceneSample& scene);
SceneSample read_scene(const std::filesystem::path& dir);

// 8-bit quantization used for all frame files.
std::vector<uint8_t> quantize_rgb(const std::vector<float>& rgb);
std::vector<float> dequantize_rgb(const std::vector<uint8_t>& rgb);

VideoFrames frames_to_video(const std::vector<ProjectionFrame>& frames);
void write_video(const std::filesystem::path& dir, const VideoFrames& video);
VideoFrames read_video(const std::filesystem::path& dir);

struct DatasetManifest {
  int num_scenes = 0;
  uint64_t seed = 0;
  SceneSpec spec;  // shared spec (per-scene seeds derived)
};

void write_manifest(const std::filesystem::path& dir, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& dir);

std::filesystem::path scene_dir(const std::filesystem::path& root, int index);

}  // namespace confctrl
