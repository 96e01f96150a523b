#include "confctrl/sceneio.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>

#include "confctrl/pngio.hpp"

namespace confctrl {

using nlohmann::json;

namespace {

constexpr char kCloudMagic[8] = {'C', 'O', 'N', 'F', 'P', 'C', '0', '1'};

json spec_to_json(const SceneSpec& s) {
  return json{{"seed", s.seed},
              {"num_points", s.num_points},
              {"height", s.height},
              {"width", s.width},
              {"num_frames", s.num_frames},
              {"depth_noise_sigma", s.depth_noise_sigma},
              {"conf_sharpness", s.conf_sharpness},
              {"trajectory_spread", s.trajectory_spread},
              {"focal", s.focal}};
}

SceneSpec spec_from_json(const json& j) {
  SceneSpec s;
  s.seed = j.at("seed").get<uint64_t>();
  s.num_points = j.at("num_points");
  s.height = j.at("height");
  s.width = j.at("width");
  s.num_frames = j.at("num_frames");
  s.depth_noise_sigma = j.at("depth_noise_sigma");
  s.conf_sharpness = j.at("conf_sharpness");
  s.trajectory_spread = j.at("trajectory_spread");
  s.focal = j.at("focal");
  return s;
}

void write_json(const std::filesystem::path& p, const json& j) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << j.dump(2) << "\n";
}

json load_json(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw std::runtime_error("cannot read " + p.string());
  return json::parse(f);
}

void write_cloud_block(std::ofstream& f, const ConfidentPointCloud& pc) {
  f.write(kCloudMagic, 8);
  const uint64_t n = pc.size();
  f.write(reinterpret_cast<const char*>(&n), 8);
  for (size_t i = 0; i < pc.size(); ++i) {
    const float rec[7] = {float(pc.positions[i].x()), float(pc.positions[i].y()),
                          float(pc.positions[i].z()), pc.colors[i].x(),
                          pc.colors[i].y(),           pc.colors[i].z(),
                          pc.confidence[i]};
    f.write(reinterpret_cast<const char*>(rec), sizeof(rec));
  }
}

ConfidentPointCloud read_cloud_block(std::ifstream& f, const std::string& what) {
  char magic[8];
  uint64_t n = 0;
  f.read(magic, 8);
  f.read(reinterpret_cast<char*>(&n), 8);
  if (!f || std::memcmp(magic, kCloudMagic, 8) != 0)
    throw std::runtime_error("cloud.bin: bad header in " + what);
  ConfidentPointCloud pc;
  pc.positions.reserve(n);
  pc.colors.reserve(n);
  pc.confidence.reserve(n);
  for (uint64_t i = 0; i < n; ++i) {
    float rec[7];
    f.read(reinterpret_cast<char*>(rec), sizeof(rec));
    if (!f) throw std::runtime_error("cloud.bin: truncated in " + what);
    pc.positions.emplace_back(rec[0], rec[1], rec[2]);
    pc.colors.emplace_back(rec[3], rec[4], rec[5]);
    pc.confidence.push_back(rec[6]);
  }
  return pc;
}

json pose_to_json(const CameraPose& p) {
  json m = json::array();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      double v = r == 3 ? (c == 3 ? 1.0 : 0.0)
                        : (c == 3 ? p.translation[r] : p.rotation(r, c));
      m.push_back(v);
    }
  return m;
}

CameraPose pose_from_json(const json& m) {
  CameraPose p;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) p.rotation(r, c) = m.at(r * 4 + c).get<double>();
    p.translation[r] = m.at(r * 4 + 3).get<double>();
  }
  return p;
}

}  // namespace

std::vector<uint8_t> quantize_rgb(const std::vector<float>& rgb) {
  std::vector<uint8_t> out(rgb.size());
  for (size_t i = 0; i < rgb.size(); ++i) {
    const float v = std::clamp(rgb[i], 0.0f, 1.0f);
    out[i] = uint8_t(std::lround(v * 255.0f));
  }
  return out;
}

std::vector<float> dequantize_rgb(const std::vector<uint8_t>& rgb) {
  std::vector<float> out(rgb.size());
  for (size_t i = 0; i < rgb.size(); ++i) out[i] = float(rgb[i]) / 255.0f;
  return out;
}

VideoFrames frames_to_video(const std::vector<ProjectionFrame>& frames) {
  VideoFrames v;
  v.t = int(frames.size());
  v.height = frames.at(0).height;
  v.width = frames.at(0).width;
  v.data.reserve(size_t(v.t) * v.height * v.width * 3);
  for (const auto& f : frames) v.data.insert(v.data.end(), f.rgb.begin(), f.rgb.end());
  return v;
}

void write_scene(const std::filesystem::path& dir, const SceneSample& scene) {
  std::filesystem::create_directories(dir / "frames");
  json meta = {{"spec", spec_to_json(scene.spec)},
               {"intrinsics",
                {{"fx", scene.intrinsics.fx},
                 {"fy", scene.intrinsics.fy},
                 {"cx", scene.intrinsics.cx},
                 {"cy", scene.intrinsics.cy},
                 {"width", scene.intrinsics.width},
                 {"height", scene.intrinsics.height}}}};
  write_json(dir / "meta.json", meta);

  json poses = json::array();
  for (const auto& p : scene.poses) poses.push_back(pose_to_json(p));
  write_json(dir / "poses.json", poses);

  for (size_t t = 0; t < scene.frames.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04zu.png", t);
    const auto px = quantize_rgb(scene.frames[t].rgb);
    write_png_rgb8((dir / "frames" / name).string(), px.data(),
                   scene.frames[t].width, scene.frames[t].height);
  }

  std::ofstream cf(dir / "cloud.bin", std::ios::binary);
  if (!cf) throw std::runtime_error("cannot write cloud.bin");
  write_cloud_block(cf, scene.clean_cloud);
  write_cloud_block(cf, scene.noisy_cloud);

  json corr = json::array();
  for (const auto& c : scene.correspondences) {
    json rec = {{"world", {c.world.x(), c.world.y(), c.world.z()}},
                {"pixels", json::array()}};
    for (const auto& px : c.pixels) rec["pixels"].push_back({px.x(), px.y()});
    corr.push_back(rec);
  }
  write_json(dir / "corr.json", corr);
}

SceneSample read_scene(const std::filesystem::path& dir) {
  SceneSample scene;
  const json meta = load_json(dir / "meta.json");
  scene.spec = spec_from_json(meta.at("spec"));
  const json& ij = meta.at("intrinsics");
  scene.intrinsics = {ij.at("fx"), ij.at("fy"), ij.at("cx"),
                      ij.at("cy"), ij.at("width"), ij.at("height")};

  for (const auto& pj : load_json(dir / "poses.json"))
    scene.poses.push_back(pose_from_json(pj));

  std::ifstream cf(dir / "cloud.bin", std::ios::binary);
  if (!cf) throw std::runtime_error("cannot read cloud.bin");
  scene.clean_cloud = read_cloud_block(cf, dir.string());
  scene.noisy_cloud = read_cloud_block(cf, dir.string());

  // frames are a pure function of cloud and poses; re-render rather than
  // trusting the quantized PNGs
  scene.frames.reserve(scene.poses.size());
  for (const auto& pose : scene.poses)
    scene.frames.push_back(project_point_cloud(scene.clean_cloud, pose, scene.intrinsics));

  for (const auto& cj : load_json(dir / "corr.json")) {
    Correspondence c;
    c.world = Eigen::Vector3d(cj.at("world").at(0), cj.at("world").at(1), cj.at("world").at(2));
    for (const auto& px : cj.at("pixels"))
      c.pixels.emplace_back(px.at(0).get<double>(), px.at(1).get<double>());
    scene.correspondences.push_back(std::move(c));
  }
  return scene;
}

void write_video(const std::filesystem::path& dir, const VideoFrames& video) {
  std::filesystem::create_directories(dir);
  const size_t frame_sz = size_t(video.height) * video.width * 3;
  for (int t = 0; t < video.t; ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04d.png", t);
    std::vector<float> rgb(video.data.begin() + t * frame_sz,
                           video.data.begin() + (t + 1) * frame_sz);
    const auto px = quantize_rgb(rgb);
    write_png_rgb8((dir / name).string(), px.data(), video.width, video.height);
  }
}

VideoFrames read_video(const std::filesystem::path& dir) {
  VideoFrames v;
  for (int t = 0;; ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04d.png", t);
    const auto path = dir / name;
    if (!std::filesystem::exists(path)) break;
    int w = 0, h = 0;
    const auto px = read_png_rgb8(path.string(), w, h);
    if (t == 0) {
      v.height = h;
      v.width = w;
    } else if (h != v.height || w != v.width) {
      throw std::runtime_error("video frames disagree on resolution in " + dir.string());
    }
    const auto f = dequantize_rgb(px);
    v.data.insert(v.data.end(), f.begin(), f.end());
    v.t = t + 1;
  }
  if (v.t == 0) throw std::runtime_error("no frames found in " + dir.string());
  return v;
}

void write_manifest(const std::filesystem::path& dir, const DatasetManifest& m) {
  write_json(dir / "manifest.json",
             json{{"num_scenes", m.num_scenes}, {"seed", m.seed}, {"spec", spec_to_json(m.spec)}});
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  const json j = load_json(dir / "manifest.json");
  DatasetManifest m;
  m.num_scenes = j.at("num_scenes");
  m.seed = j.at("seed");
  m.spec = spec_from_json(j.at("spec"));
  return m;
}

std::filesystem::path scene_dir(const std::filesystem::path& root, int index) {
  char name[32];
  std::snprintf(name, sizeof(name), "scene_%04d", index);
  return root / name;
}

}  // namespace confctrl
