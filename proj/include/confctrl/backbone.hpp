#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "confctrl/rng.hpp"
#include "confctrl/tensor.hpp"

namespace confctrl {

enum class FusionMode {
  kCrossAttention,  // u = attn(q = camera tokens, kv = pc tokens)
  kCameraOnly,      // u = attn over camera tokens alone
  kAdditive,        // u = camera tokens + pc tokens
};

struct ModelConfig {
  int embed_dim = 64;
  int num_heads = 4;
  int num_backbone_blocks = 6;
  int num_kalman_blocks = 2;
  std::vector<int> kalman_insertion_indices;  // 1-based; empty = evenly spaced
  int diff_blocks_per_update = 1;
  int patch = 2;        // pixel->latent codec patch p
  int token_patch = 2;  // latent->token patch p'
  int num_frames = 9;
  int latent_channels = 12;
  int latent_height = 16, latent_width = 16;

  // ablation switches
  bool kalman_enabled = true;
  bool update_enabled = true;             // off: Table-5 style "no update"
  FusionMode fusion = FusionMode::kCrossAttention;
  bool queries_from_camera = true;        // cross-attention role assignment
  bool last_frame_cond = true;            // off: first-frame-only conditioning

  std::vector<int> insertion_indices() const {
    if (!kalman_insertion_indices.empty()) return kalman_insertion_indices;
    std::vector<int> idx;
    for (int k = 1; k <= num_kalman_blocks; ++k)
      idx.push_back(num_backbone_blocks * k / num_kalman_blocks);
    return idx;
  }
  int tokens_per_frame() const {
    return (latent_height / token_patch) * (latent_width / token_patch);
  }
  int num_tokens() const { return num_frames * tokens_per_frame(); }

  void validate() const {
    if (embed_dim % num_heads != 0)
      throw std::invalid_argument("config: embed_dim must divide by num_heads");
    if (num_kalman_blocks > num_backbone_blocks)
      throw std::invalid_argument("config: more kalman blocks than backbone blocks");
    if (latent_height % token_patch != 0 || latent_width % token_patch != 0)
      throw std::invalid_argument("config: latent size not divisible by token patch");
    const auto idx = insertion_indices();
    for (size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 1 || idx[i] > num_backbone_blocks)
        throw std::invalid_argument("config: insertion index out of range");
      if (i > 0 && idx[i] <= idx[i - 1])
        throw std::invalid_argument("config: insertion indices must be strictly increasing");
    }
  }
};

// Conditioning planes on the latent grid, all flat row-major.
template <typename T>
struct Conditioning {
  std::vector<T> endpoint;  // T x C x H' x W', zero off the endpoint frames
  std::vector<T> mask;      // T x 1 x H' x W', endpoint indicator
  std::vector<T> z_pc;      // T x C x H' x W', projected point cloud latent
  std::vector<T> plucker;   // T x 6 x H' x W'
};

// Toy DiT velocity network with Kalman predict-update conditioning blocks.
template <typename T>
class Backbone {
 public:
  using Tn = ad::Tensor<T>;

  Backbone(ModelConfig cfg, uint64_t init_seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    build_params(init_seed);
    build_index_maps();
  }

  const ModelConfig& config() const { return cfg_; }
  std::map<std::string, Tn>& params() { return params_; }
  const std::map<std::string, Tn>& params() const { return params_; }

  // z_t: flat T x C x H' x W' latent values; t in [0,1].
  // Returns velocity with the same layout.
  Tn forward(const std::vector<T>& z_t, double t, const Conditioning<T>& cond) const {
    check_input(z_t, t, cond);
    const int D = cfg_.embed_dim;
    const int n_tok = cfg_.num_tokens();

    // video stream: [z_t | endpoint latents | endpoint mask] channels
    std::vector<T> vid_planes = concat_channels(z_t, cond);
    Tn x = ad::linear(patchify(vid_planes, 2 * cfg_.latent_channels + 1),
                      p("embed.video.w"), p("embed.video.b"));
    Tn pos = position_embedding();
    x = ad::add(x, pos);

    Tn cam = ad::add(ad::linear(patchify(cond.plucker, 6), p("embed.cam.w"), p("embed.cam.b")), pos);
    Tn pc = ad::add(ad::linear(patchify(cond.z_pc, cfg_.latent_channels),
                               p("embed.pc.w"), p("embed.pc.b")), pos);

    Tn t_emb = timestep_embedding(t);

    const auto ins = cfg_.insertion_indices();
    const int K = cfg_.num_kalman_blocks;
    int k = 0;
    for (int i = 0; i < cfg_.num_backbone_blocks; ++i) {
      x = dit_block(x, t_emb, "blk" + std::to_string(i));
      if (cfg_.kalman_enabled && k < K && ins[k] == i + 1) {
        const std::string kb = "kal" + std::to_string(k);
        x = kalman_block(x, cam, pc, t_emb, kb);
        if (k < K - 1) pc = dit_block(pc, t_emb, kb + ".pc");
        ++k;
      }
    }
    x = ad::layernorm_rows(x);
    Tn out_tok = ad::linear(x, p("head.w"), p("head.b"));
    (void)n_tok;
    (void)D;
    return ad::gather(ad::reshape(out_tok, {int(out_tok.numel())}), unpatchify_idx_,
                      {cfg_.num_frames, cfg_.latent_channels, cfg_.latent_height, cfg_.latent_width});
  }

  // Plain inference: forward values only.
  std::vector<T> velocity(const std::vector<T>& z_t, double t,
                          const Conditioning<T>& cond) const {
    return forward(z_t, t, cond).val();
  }

  // Individual blocks exposed for diagnostics. `prefix` names a parameter
  // group, e.g. "blk0" or "kal0".
  Tn run_dit_block(const std::string& prefix, const Tn& x, double t) const {
    return dit_block(x, timestep_embedding(t), prefix);
  }
  Tn run_kalman_block(const std::string& prefix, const Tn& z, const Tn& cam,
                      const Tn& pc, double t) const {
    return kalman_block(z, cam, pc, timestep_embedding(t), prefix);
  }

 private:
  const Tn& p(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::logic_error("missing parameter " + name);
    return it->second;
  }

  void check_input(const std::vector<T>& z_t, double t, const Conditioning<T>& cond) const {
    const size_t n = size_t(cfg_.num_frames) * cfg_.latent_channels * cfg_.latent_height * cfg_.latent_width;
    if (z_t.size() != n) throw std::invalid_argument("forward: latent size mismatch");
    if (cond.endpoint.size() != n || cond.z_pc.size() != n ||
        cond.mask.size() != n / cfg_.latent_channels ||
        cond.plucker.size() != n / cfg_.latent_channels * 6)
      throw std::invalid_argument("forward: conditioning size mismatch");
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("forward: t outside [0,1]");
    for (T v : z_t)
      if (!std::isfinite(double(v))) throw std::invalid_argument("forward: non-finite input");
  }

  // ---- parameter construction ----

  // Each tensor gets its own stream keyed by name, so the initialization of
  // one tensor never depends on how many were created before it.
  void add_param(const std::string& name, std::vector<int> shape, T std_dev) {
    Tn t = Tn::zeros(std::move(shape));
    if (std_dev > 0) {
      Rng r(Rng::derive(init_seed_, name, 0), "init");
      for (auto& v : t.val()) v = T(std_dev) * T(r.normal());
    }
    t.set_requires_grad();
    params_.emplace(name, std::move(t));
  }

  void add_attention(const std::string& prefix) {
    const int D = cfg_.embed_dim;
    for (const char* nm : {"wq", "wk", "wv", "wo"})
      add_param(prefix + "." + nm, {D, D}, T(0.02));
    for (const char* nm : {"bq", "bk", "bv", "bo"})
      add_param(prefix + "." + nm, {D}, T(0));
  }

  void add_dit_block(const std::string& prefix) {
    const int D = cfg_.embed_dim;
    add_attention(prefix + ".attn");
    add_param(prefix + ".mlp.w1", {D, 4 * D}, T(0.02));
    add_param(prefix + ".mlp.b1", {4 * D}, T(0));
    add_param(prefix + ".mlp.w2", {4 * D, D}, T(0.02));
    add_param(prefix + ".mlp.b2", {D}, T(0));
    // zero-init modulation: the block is exactly the identity at init
    add_param(prefix + ".mod.w", {D, 6 * D}, T(0));
    add_param(prefix + ".mod.b", {6 * D}, T(0));
  }

  void build_params(uint64_t seed) {
    init_seed_ = seed;
    const int D = cfg_.embed_dim;
    const int C = cfg_.latent_channels;
    const int pp = cfg_.token_patch * cfg_.token_patch;

    add_param("embed.video.w", {(2 * C + 1) * pp, D}, T(0.02));
    add_param("embed.video.b", {D}, T(0));
    add_param("embed.cam.w", {6 * pp, D}, T(0.02));
    add_param("embed.cam.b", {D}, T(0));
    add_param("embed.pc.w", {C * pp, D}, T(0.02));
    add_param("embed.pc.b", {D}, T(0));
    add_param("pos.frame", {cfg_.num_frames, D}, T(0.02));
    add_param("pos.row", {cfg_.latent_height / cfg_.token_patch, D}, T(0.02));
    add_param("pos.col", {cfg_.latent_width / cfg_.token_patch, D}, T(0.02));
    add_param("tmlp.w1", {D, D}, T(0.02));
    add_param("tmlp.b1", {D}, T(0));
    add_param("tmlp.w2", {D, D}, T(0.02));
    add_param("tmlp.b2", {D}, T(0));

    for (int i = 0; i < cfg_.num_backbone_blocks; ++i)
      add_dit_block("blk" + std::to_string(i));

    for (int k = 0; k < cfg_.num_kalman_blocks; ++k) {
      const std::string kb = "kal" + std::to_string(k);
      if (cfg_.fusion != FusionMode::kAdditive) add_attention(kb + ".xattn");
      add_param(kb + ".pred_zero.w", {D, D}, T(0));
      add_param(kb + ".pred_zero.b", {D}, T(0));
      if (cfg_.update_enabled) {
        for (int j = 0; j < cfg_.diff_blocks_per_update; ++j)
          add_dit_block(kb + ".diff" + std::to_string(j));
        add_param(kb + ".upd_zero.w", {D, D}, T(0));
        add_param(kb + ".upd_zero.b", {D}, T(0));
      }
      if (k < cfg_.num_kalman_blocks - 1) add_dit_block(kb + ".pc");
    }

    add_param("head.w", {D, C * pp}, T(0));  // zero-init output: v == 0 at init
    add_param("head.b", {C * pp}, T(0));
  }

  // ---- index maps ----

  void build_index_maps() {
    const int p2 = cfg_.token_patch;
    const int Hp = cfg_.latent_height, Wp = cfg_.latent_width;
    const int nr = Hp / p2, ncl = Wp / p2;
    const int Tn_ = cfg_.num_frames;
    const int D = cfg_.embed_dim;

    auto patch_idx = [&](int channels) {
      auto idx = std::make_shared<std::vector<int64_t>>();
      idx->reserve(size_t(Tn_) * nr * ncl * channels * p2 * p2);
      for (int f = 0; f < Tn_; ++f)
        for (int r = 0; r < nr; ++r)
          for (int c = 0; c < ncl; ++c)
            for (int ch = 0; ch < channels; ++ch)
              for (int py = 0; py < p2; ++py)
                for (int px = 0; px < p2; ++px)
                  idx->push_back(((int64_t(f) * channels + ch) * Hp + r * p2 + py) * Wp +
                                 c * p2 + px);
      return idx;
    };
    patchify_idx_[2 * cfg_.latent_channels + 1] = patch_idx(2 * cfg_.latent_channels + 1);
    patchify_idx_[6] = patch_idx(6);
    if (patchify_idx_.find(cfg_.latent_channels) == patchify_idx_.end())
      patchify_idx_[cfg_.latent_channels] = patch_idx(cfg_.latent_channels);

    // inverse of the C-channel patchify, from token-major back to planes
    unpatchify_idx_ = std::make_shared<std::vector<int64_t>>();
    const int C = cfg_.latent_channels;
    const int feat = C * p2 * p2;
    unpatchify_idx_->resize(size_t(Tn_) * C * Hp * Wp);
    for (int f = 0; f < Tn_; ++f)
      for (int r = 0; r < nr; ++r)
        for (int c = 0; c < ncl; ++c) {
          const int64_t tok = (int64_t(f) * nr + r) * ncl + c;
          for (int ch = 0; ch < C; ++ch)
            for (int py = 0; py < p2; ++py)
              for (int px = 0; px < p2; ++px) {
                const size_t plane =
                    ((size_t(f) * C + ch) * Hp + r * p2 + py) * Wp + c * p2 + px;
                (*unpatchify_idx_)[plane] = tok * feat + (ch * p2 + py) * p2 + px;
              }
        }

    auto table_idx = [&](auto&& row_of_token, int) {
      auto idx = std::make_shared<std::vector<int64_t>>();
      idx->reserve(size_t(Tn_) * nr * ncl * D);
      for (int f = 0; f < Tn_; ++f)
        for (int r = 0; r < nr; ++r)
          for (int c = 0; c < ncl; ++c)
            for (int d = 0; d < D; ++d)
              idx->push_back(int64_t(row_of_token(f, r, c)) * D + d);
      return idx;
    };
    pos_frame_idx_ = table_idx([](int f, int, int) { return f; }, 0);
    pos_row_idx_ = table_idx([](int, int r, int) { return r; }, 0);
    pos_col_idx_ = table_idx([](int, int, int c) { return c; }, 0);
  }

  // ---- graph builders ----

  Tn patchify(const std::vector<T>& planes, int channels) const {
    const int feat = channels * cfg_.token_patch * cfg_.token_patch;
    Tn in = Tn::from({int(planes.size())}, planes);
    auto it = patchify_idx_.find(channels);
    if (it == patchify_idx_.end()) throw std::logic_error("patchify: no index map");
    return ad::gather(in, it->second, {cfg_.num_tokens(), feat});
  }

  Tn position_embedding() const {
    Tn pf = ad::gather(p("pos.frame"), pos_frame_idx_, {cfg_.num_tokens(), cfg_.embed_dim});
    Tn pr = ad::gather(p("pos.row"), pos_row_idx_, {cfg_.num_tokens(), cfg_.embed_dim});
    Tn pc = ad::gather(p("pos.col"), pos_col_idx_, {cfg_.num_tokens(), cfg_.embed_dim});
    return ad::add(ad::add(pf, pr), pc);
  }

  Tn timestep_embedding(double t) const {
    const int D = cfg_.embed_dim;
    std::vector<T> sin_emb(static_cast<size_t>(D));
    const int half = D / 2;
    for (int j = 0; j < half; ++j) {
      const double freq = std::pow(1000.0, double(j) / half);
      sin_emb[j] = T(std::sin(t * freq));
      sin_emb[half + j] = T(std::cos(t * freq));
    }
    Tn e = Tn::from({1, D}, std::move(sin_emb));
    Tn h = ad::silu(ad::linear(e, p("tmlp.w1"), p("tmlp.b1")));
    return ad::linear(h, p("tmlp.w2"), p("tmlp.b2"));
  }

  Tn attention(const Tn& q_in, const Tn& kv_in, const std::string& prefix) const {
    const int D = cfg_.embed_dim;
    const int H = cfg_.num_heads;
    const int dh = D / H;
    Tn q = ad::linear(q_in, p(prefix + ".wq"), p(prefix + ".bq"));
    Tn k = ad::linear(kv_in, p(prefix + ".wk"), p(prefix + ".bk"));
    Tn v = ad::linear(kv_in, p(prefix + ".wv"), p(prefix + ".bv"));
    std::vector<Tn> heads;
    heads.reserve(H);
    const T inv_sqrt = T(1) / std::sqrt(T(dh));
    for (int h = 0; h < H; ++h) {
      Tn qh = ad::slice_cols(q, h * dh, dh);
      Tn kh = ad::slice_cols(k, h * dh, dh);
      Tn vh = ad::slice_cols(v, h * dh, dh);
      heads.push_back(ad::attend(qh, kh, vh, inv_sqrt));
    }
    return ad::linear(ad::concat_cols(heads), p(prefix + ".wo"), p(prefix + ".bo"));
  }

  Tn dit_block(const Tn& x, const Tn& t_emb, const std::string& prefix) const {
    const int D = cfg_.embed_dim;
    Tn mod = ad::linear(ad::silu(t_emb), p(prefix + ".mod.w"), p(prefix + ".mod.b"));
    auto m = [&](int i) { return ad::slice_cols(mod, i * D, D); };
    Tn s1 = ad::add_scalar(m(0), T(1)), b1 = m(1), g1 = m(2);
    Tn s2 = ad::add_scalar(m(3), T(1)), b2 = m(4), g2 = m(5);

    Tn a_in = ad::add_row(ad::mul_row(ad::layernorm_rows(x), s1), b1);
    Tn h = ad::add(x, ad::mul_row(attention(a_in, a_in, prefix + ".attn"), g1));

    Tn m_in = ad::add_row(ad::mul_row(ad::layernorm_rows(h), s2), b2);
    Tn mh = ad::silu(ad::linear(m_in, p(prefix + ".mlp.w1"), p(prefix + ".mlp.b1")));
    Tn mo = ad::linear(mh, p(prefix + ".mlp.w2"), p(prefix + ".mlp.b2"));
    return ad::add(h, ad::mul_row(mo, g2));
  }

  Tn kalman_block(const Tn& z, const Tn& cam, const Tn& pc, const Tn& t_emb,
                  const std::string& prefix) const {
    Tn u;
    switch (cfg_.fusion) {
      case FusionMode::kCrossAttention: {
        Tn qn = ad::layernorm_rows(cfg_.queries_from_camera ? cam : pc);
        Tn kvn = ad::layernorm_rows(cfg_.queries_from_camera ? pc : cam);
        u = attention(qn, kvn, prefix + ".xattn");
        break;
      }
      case FusionMode::kCameraOnly: {
        Tn cn = ad::layernorm_rows(cam);
        u = attention(cn, cn, prefix + ".xattn");
        break;
      }
      case FusionMode::kAdditive:
        u = ad::add(cam, pc);
        break;
    }
    Tn z_pred = ad::add(z, ad::linear(u, p(prefix + ".pred_zero.w"), p(prefix + ".pred_zero.b")));
    if (!cfg_.update_enabled) return z_pred;

    Tn d = ad::sub(z_pred, pc);
    for (int j = 0; j < cfg_.diff_blocks_per_update; ++j)
      d = dit_block(d, t_emb, prefix + ".diff" + std::to_string(j));
    return ad::add(z_pred, ad::linear(d, p(prefix + ".upd_zero.w"), p(prefix + ".upd_zero.b")));
  }

  std::vector<T> concat_channels(const std::vector<T>& z_t, const Conditioning<T>& cond) const {
    const int C = cfg_.latent_channels;
    const size_t plane = size_t(cfg_.latent_height) * cfg_.latent_width;
    std::vector<T> out(size_t(cfg_.num_frames) * (2 * C + 1) * plane);
    for (int f = 0; f < cfg_.num_frames; ++f) {
      T* dst = out.data() + size_t(f) * (2 * C + 1) * plane;
      const T* zf = z_t.data() + size_t(f) * C * plane;
      const T* ef = cond.endpoint.data() + size_t(f) * C * plane;
      const T* mf = cond.mask.data() + size_t(f) * plane;
      std::copy(zf, zf + C * plane, dst);
      std::copy(ef, ef + C * plane, dst + C * plane);
      std::copy(mf, mf + plane, dst + 2 * size_t(C) * plane);
    }
    return out;
  }

  ModelConfig cfg_;
  uint64_t init_seed_ = 0;
  std::map<std::string, Tn> params_;
  std::map<int, std::shared_ptr<std::vector<int64_t>>> patchify_idx_;
  std::shared_ptr<std::vector<int64_t>> unpatchify_idx_;
  std::shared_ptr<std::vector<int64_t>> pos_frame_idx_, pos_row_idx_, pos_col_idx_;
};

}  // namespace confctrl
