#include "confctrl/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "confctrl/config.hpp"

namespace confctrl {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'C', 'C', 'K', 'P', '0', '0', '0', '1'};
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  json manifest = {{"config", to_json(ck.config)},
                   {"flow", to_json(ck.flow)},
                   {"train_step", ck.train_step},
                   {"init_seed", ck.init_seed},
                   {"variant", ck.variant},
                   {"tensors", json::array()}};
  uint64_t offset = 0;
  for (const auto& [name, t] : ck.tensors) {
    manifest["tensors"].push_back({{"name", name},
                                   {"shape", t.first},
                                   {"offset", offset},
                                   {"dtype", "f32le"}});
    offset += t.second.size() * sizeof(float);
  }
  const std::string mstr = manifest.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path.string());
  f.write(kMagic, 8);
  const uint64_t mlen = mstr.size();
  f.write(reinterpret_cast<const char*>(&mlen), 8);
  f.write(mstr.data(), std::streamsize(mstr.size()));
  for (const auto& [name, t] : ck.tensors)
    f.write(reinterpret_cast<const char*>(t.second.data()),
            std::streamsize(t.second.size() * sizeof(float)));
  if (!f) throw std::runtime_error("checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read checkpoint " + path.string());
  char magic[8];
  uint64_t mlen = 0;
  f.read(magic, 8);
  f.read(reinterpret_cast<char*>(&mlen), 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("bad checkpoint header: " + path.string());
  std::string mstr(mlen, '\0');
  f.read(mstr.data(), std::streamsize(mlen));
  const json manifest = json::parse(mstr);

  Checkpoint ck;
  from_json_strict(manifest.at("config"), ck.config);
  from_json_strict(manifest.at("flow"), ck.flow);
  ck.train_step = manifest.at("train_step");
  ck.init_seed = manifest.at("init_seed");
  ck.variant = manifest.at("variant");

  const std::streampos data_start = f.tellg();
  for (const auto& tj : manifest.at("tensors")) {
    const std::string name = tj.at("name");
    const std::vector<int> shape = tj.at("shape").get<std::vector<int>>();
    const uint64_t offset = tj.at("offset");
    size_t n = 1;
    for (int d : shape) n *= size_t(d);
    std::vector<float> data(n);
    f.seekg(data_start + std::streampos(offset));
    f.read(reinterpret_cast<char*>(data.data()), std::streamsize(n * sizeof(float)));
    if (!f) throw std::runtime_error("truncated checkpoint tensor " + name);
    ck.tensors.emplace(name, std::make_pair(shape, std::move(data)));
  }
  return ck;
}

Checkpoint make_checkpoint(const Backbone<float>& model, const Adam<float>& opt,
                           const FlowConfig& flow, int64_t train_step,
                           uint64_t init_seed, const std::string& variant) {
  Checkpoint ck;
  ck.config = model.config();
  ck.flow = flow;
  ck.train_step = train_step;
  ck.init_seed = init_seed;
  ck.variant = variant;
  for (const auto& [name, t] : model.params())
    ck.tensors.emplace(name, std::make_pair(t.shape(), t.val()));
  ck.tensors.emplace("optim.step",
                     std::make_pair(std::vector<int>{1},
                                    std::vector<float>{float(opt.step_count())}));
  for (const auto& [name, mom] : const_cast<Adam<float>&>(opt).state()) {
    if (mom.m.empty()) continue;
    const int n = int(mom.m.size());
    ck.tensors.emplace("optim.m." + name, std::make_pair(std::vector<int>{n}, mom.m));
    ck.tensors.emplace("optim.v." + name, std::make_pair(std::vector<int>{n}, mom.v));
  }
  return ck;
}

void restore_model(const Checkpoint& ck, Backbone<float>& model, Adam<float>* opt) {
  for (auto& [name, t] : model.params()) {
    auto it = ck.tensors.find(name);
    if (it == ck.tensors.end())
      throw std::runtime_error("checkpoint missing tensor " + name);
    if (it->second.first != t.shape())
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    t.val() = it->second.second;
  }
  if (!opt) return;
  auto sit = ck.tensors.find("optim.step");
  if (sit != ck.tensors.end()) opt->set_step_count(int64_t(sit->second.second.at(0)));
  for (auto& [name, t] : model.params()) {
    auto mit = ck.tensors.find("optim.m." + name);
    auto vit = ck.tensors.find("optim.v." + name);
    if (mit == ck.tensors.end() || vit == ck.tensors.end()) continue;
    auto& mom = opt->state()[name];
    mom.m = mit->second.second;
    mom.v = vit->second.second;
    if (mom.m.size() != t.numel() || mom.v.size() != t.numel())
      throw std::runtime_error("checkpoint optimizer state mismatch for " + name);
  }
}

}  // namespace confctrl
