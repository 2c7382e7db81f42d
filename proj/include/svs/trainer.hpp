#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "svs/adversary.hpp"
#include "svs/checkpoint.hpp"
#include "svs/dataset.hpp"
#include "svs/melsyn.hpp"
#include "svs/srnet.hpp"

namespace svs {

struct TrainConfig {
  double base_lr = 2e-4;
  int halve_every = 30000;
  double beta1 = 0.5;
  double beta2 = 0.9;
  int batch_size = 4;
  int crop_frames = 64;  // coarse frames; fine crop is 4x this
  double gamma_r1 = 10.0;
  int d_model = 64;
  int disc_channels = 8;
  double dropout = 0.05;
  uint64_t seed = 0;
  std::string manifest;
  int total_iters = 10000;
  bool use_gan = true;
  bool overfit_single_batch = false;  // reuse the first batch every step
  bool adv_literal_eq5 = false;
  bool r1_on_condition = true;  // R1 norm over both (M, S); false: S only
  bool mask_concat_key = false;
  int validate_every = 500;
  int checkpoint_every = 2000;

  void validate() const {
    if (base_lr <= 0 || halve_every <= 0 || batch_size <= 0 || crop_frames <= 0 ||
        d_model <= 0 || total_iters < 0 || gamma_r1 < 0)
      throw ValueError("TrainConfig: all quantities must be positive");
  }

  NetConfig net_config() const {
    NetConfig n;
    n.d_model = d_model;
    n.dropout = dropout;
    n.disc_channels = disc_channels;
    n.mask_concat_key = mask_concat_key;
    return n;
  }

  nlohmann::json to_json() const {
    return {{"base_lr", base_lr},
            {"halve_every", halve_every},
            {"beta1", beta1},
            {"beta2", beta2},
            {"batch_size", batch_size},
            {"crop_frames", crop_frames},
            {"gamma_r1", gamma_r1},
            {"d_model", d_model},
            {"disc_channels", disc_channels},
            {"dropout", dropout},
            {"seed", seed},
            {"manifest", manifest},
            {"total_iters", total_iters},
            {"use_gan", use_gan},
            {"overfit_single_batch", overfit_single_batch},
            {"adv_literal_eq5", adv_literal_eq5},
            {"r1_on_condition", r1_on_condition},
            {"mask_concat_key", mask_concat_key},
            {"validate_every", validate_every},
            {"checkpoint_every", checkpoint_every}};
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.base_lr = j.value("base_lr", c.base_lr);
    c.halve_every = j.value("halve_every", c.halve_every);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.crop_frames = j.value("crop_frames", c.crop_frames);
    c.gamma_r1 = j.value("gamma_r1", c.gamma_r1);
    c.d_model = j.value("d_model", c.d_model);
    c.disc_channels = j.value("disc_channels", c.disc_channels);
    c.dropout = j.value("dropout", c.dropout);
    c.seed = j.value("seed", c.seed);
    c.manifest = j.value("manifest", c.manifest);
    c.total_iters = j.value("total_iters", c.total_iters);
    c.use_gan = j.value("use_gan", c.use_gan);
    c.overfit_single_batch = j.value("overfit_single_batch", c.overfit_single_batch);
    c.adv_literal_eq5 = j.value("adv_literal_eq5", c.adv_literal_eq5);
    c.r1_on_condition = j.value("r1_on_condition", c.r1_on_condition);
    c.mask_concat_key = j.value("mask_concat_key", c.mask_concat_key);
    c.validate_every = j.value("validate_every", c.validate_every);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.validate();
    return c;
  }
};

// Loss-term ramps: the SR term fades in over the first 500 iterations and the
// adversarial terms wake in hundredth steps every 5000 iterations.
inline std::pair<double, double> loss_weights(int64_t iter) {
  if (iter < 0) throw ValueError("loss_weights: negative iteration");
  double lr_sr = std::min(0.2 * (static_cast<double>(iter) / 100.0), 1.0);
  double lr_gan = std::min(0.01 * static_cast<double>(iter / 5000), 1.0);
  return {lr_sr, lr_gan};
}

inline double lr_schedule(int64_t iter, double base_lr, int halve_every) {
  if (iter < 0) throw ValueError("lr_schedule: negative iteration");
  return base_lr * std::pow(0.5, static_cast<double>(iter / halve_every));
}

struct TrainMetrics {
  double l1_mel = 0, ld_mel = 0, l_att = 0, l1_diff = 0;
  double l1_sr = 0, ld_sr = 0;
  double l_adv_g = 0, l_adv_d = 0, r1 = 0;
  double lr_sr = 0, lr_gan = 0, lr = 0;

  std::map<std::string, double> to_map() const {
    return {{"L1_mel", l1_mel},   {"Ld_mel", ld_mel}, {"L_att", l_att},
            {"L1_diff", l1_diff}, {"L1_sr", l1_sr},   {"Ld_sr", ld_sr},
            {"L_advG", l_adv_g},  {"L_advD", l_adv_d}, {"R1", r1},
            {"lr_SR", lr_sr},     {"lr_GAN", lr_gan}, {"lr", lr}};
  }
};

struct ValMetrics {
  double l1_mel = 0, ld_mel = 0, l_att = 0, l1_diff = 0, l1_sr = 0, ld_sr = 0;
};

// Owns both networks, the discriminator, their optimizers and the training
// rng. One step = an optional discriminator update followed by the joint
// generator update of Eq.-6 form: L_MS + lr_SR * L_SR + lr_GAN * L_adv_G.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, Dataset dataset)
      : cfg_(cfg),
        net_cfg_(cfg.net_config()),
        data_(std::move(dataset)),
        init_rng_(cfg.seed),
        train_rng_(cfg.seed + 1),
        melsyn_(gen_params_, net_cfg_, init_rng_),
        sr_(gen_params_, net_cfg_, init_rng_),
        disc_(disc_params_, net_cfg_, init_rng_) {
    cfg_.validate();
    if (data_.train.empty()) throw ValueError("trainer: empty training split");
    for (const auto& song : data_.train)
      if (song.frames() < cfg_.crop_frames)
        throw ValueError("trainer: song " + song.id + " shorter than the crop (" +
                         std::to_string(song.frames()) + " < " +
                         std::to_string(cfg_.crop_frames) + " frames)");
    gen_state_.init(gen_params_);
    disc_state_.init(disc_params_);
  }

  const TrainConfig& config() const { return cfg_; }
  int64_t iteration() const { return iteration_; }
  const MelSynNet<float>& melsyn() const { return melsyn_; }
  const SRNet<float>& srnet() const { return sr_; }
  ParamStore<float>& gen_params() { return gen_params_; }
  ParamStore<float>& disc_params() { return disc_params_; }
  const Dataset& dataset() const { return data_; }

  TrainMetrics step() {
    auto [w_sr, w_gan] = loss_weights(iteration_);
    double lr = lr_schedule(iteration_, cfg_.base_lr, cfg_.halve_every);
    AdamConfig opt{lr, cfg_.beta1, cfg_.beta2, 1e-8};
    TrainMetrics m;
    m.lr_sr = w_sr;
    m.lr_gan = w_gan;
    m.lr = lr;

    std::vector<CropItem> batch;
    if (!cfg_.overfit_single_batch || cached_batch_.empty()) {
      for (int b = 0; b < cfg_.batch_size; ++b) {
        const SongFeatures& song =
            data_.train[train_rng_.next_below(data_.train.size())];
        int start = static_cast<int>(
            train_rng_.next_below(static_cast<uint64_t>(song.frames() - cfg_.crop_frames) + 1));
        batch.push_back(make_crop(song, start, cfg_.crop_frames));
      }
      if (cfg_.overfit_single_batch) cached_batch_ = batch;
    } else {
      batch = cached_batch_;
    }

    bool gan_active = cfg_.use_gan && w_gan > 0.0;
    RunMode train_mode{true, &train_rng_};

    if (gan_active) {
      disc_params_.zero_grad();
      std::vector<TensorF> logits_real, logits_fake;
      TensorF r1_sum;
      for (int b = 0; b < cfg_.batch_size; ++b) {
        const CropItem& item = batch[static_cast<size_t>(b)];
        TensorF fake_mel, fake_lin;
        {
          NoGradGuard ng;
          auto ms = melsyn_.forward(item.text, item.pitch, item.mel_prev, train_mode);
          auto cond = sr_.make_conditioning(ms.text, ms.pitch_enc, train_mode);
          auto srout = sr_.forward(ms.mel, cond, train_mode);
          fake_mel = ms.mel.detach();
          fake_lin = srout.s_hat.detach();
        }
        logits_real.push_back(disc_.forward(item.lin, item.mel).logit);
        logits_fake.push_back(disc_.forward(fake_lin, fake_mel).logit);
        TensorF r1b = r1_penalty(disc_, item.mel, item.lin,
                                 static_cast<float>(cfg_.gamma_r1),
                                 cfg_.r1_on_condition);
        r1_sum = b == 0 ? r1b : add(r1_sum, r1b);
      }
      TensorF r1_term = scale(r1_sum, 1.0f / static_cast<float>(cfg_.batch_size));
      auto losses = adv_losses(logits_real, logits_fake, r1_term,
                               cfg_.adv_literal_eq5);
      m.l_adv_d = losses.disc.item();
      m.r1 = r1_term.item();
      TensorF weighted = scale(losses.disc, static_cast<float>(w_gan));
      guard_finite(weighted, "discriminator loss");
      weighted.backward();
      adam_step(disc_params_, disc_state_, opt);
    }

    gen_params_.zero_grad();
    disc_params_.zero_grad();
    TensorF gen_total;
    for (int b = 0; b < cfg_.batch_size; ++b) {
      const CropItem& item = batch[static_cast<size_t>(b)];
      auto ms = melsyn_.forward(item.text, item.pitch, item.mel_prev, train_mode);
      auto msl = melsyn_loss(ms, item.mel, net_cfg_.attention_g);
      auto cond = sr_.make_conditioning(ms.text, ms.pitch_enc, train_mode);
      auto srout = sr_.forward(ms.mel, cond, train_mode);
      auto srl = sr_loss(srout, item.lin);
      TensorF total = add(msl.total, scale(srl.total, static_cast<float>(w_sr)));
      if (gan_active) {
        TensorF fake_logit = disc_.forward(srout.s_hat, ms.mel).logit;
        TensorF g_term = cfg_.adv_literal_eq5 ? f_gan(fake_logit)
                                              : scale(f_gan(fake_logit), -1.0f);
        total = add(total, scale(g_term, static_cast<float>(w_gan)));
        m.l_adv_g += g_term.item();
      }
      m.l1_mel += msl.l1.item();
      m.ld_mel += msl.ld.item();
      m.l_att += msl.latt.item();
      m.l1_diff += msl.l1_diff.item();
      m.l1_sr += srl.l1.item();
      m.ld_sr += srl.ld.item();
      gen_total = b == 0 ? total : add(gen_total, total);
    }
    gen_total = scale(gen_total, 1.0f / static_cast<float>(cfg_.batch_size));
    guard_finite(gen_total, "generator loss");
    gen_total.backward();
    adam_step(gen_params_, gen_state_, opt);

    double inv_b = 1.0 / cfg_.batch_size;
    m.l1_mel *= inv_b;
    m.ld_mel *= inv_b;
    m.l_att *= inv_b;
    m.l1_diff *= inv_b;
    m.l1_sr *= inv_b;
    m.ld_sr *= inv_b;
    m.l_adv_g *= inv_b;

    iteration_ += 1;
    return m;
  }

  // Teacher-forced losses on the validation split, dropout off.
  ValMetrics validate() {
    ValMetrics v;
    if (data_.val.empty()) return v;
    NoGradGuard ng;
    RunMode mode;
    for (const auto& song : data_.val) {
      CropItem item = make_crop(song, 0, song.frames());
      auto ms = melsyn_.forward(item.text, item.pitch, item.mel_prev, mode);
      auto msl = melsyn_loss(ms, item.mel, net_cfg_.attention_g);
      auto cond = sr_.make_conditioning(ms.text, ms.pitch_enc, mode);
      auto srl = sr_loss(sr_.forward(ms.mel, cond, mode), item.lin);
      v.l1_mel += msl.l1.item();
      v.ld_mel += msl.ld.item();
      v.l_att += msl.latt.item();
      v.l1_diff += msl.l1_diff.item();
      v.l1_sr += srl.l1.item();
      v.ld_sr += srl.ld.item();
    }
    double inv = 1.0 / static_cast<double>(data_.val.size());
    v.l1_mel *= inv;
    v.ld_mel *= inv;
    v.l_att *= inv;
    v.l1_diff *= inv;
    v.l1_sr *= inv;
    v.ld_sr *= inv;
    return v;
  }

  void save_checkpoint(const std::filesystem::path& path) const {
    CheckpointFile ckpt;
    ckpt.meta["config"] = cfg_.to_json();
    ckpt.meta["iteration"] = iteration_;
    ckpt.meta["rng"] = train_rng_.state();
    ckpt.meta["adam_t_gen"] = gen_state_.t;
    ckpt.meta["adam_t_disc"] = disc_state_.t;
    pack_params(ckpt, gen_params_, gen_state_);
    pack_params(ckpt, disc_params_, disc_state_);
    checkpoint_save(path, ckpt);
  }

  void load_checkpoint_state(const CheckpointFile& ckpt) {
    unpack_params(ckpt, gen_params_, gen_state_);
    unpack_params(ckpt, disc_params_, disc_state_);
    iteration_ = ckpt.meta.at("iteration").get<int64_t>();
    gen_state_.t = ckpt.meta.at("adam_t_gen").get<int64_t>();
    disc_state_.t = ckpt.meta.at("adam_t_disc").get<int64_t>();
    train_rng_.set_state(ckpt.meta.at("rng").get<std::string>());
  }

  static TrainConfig checkpoint_config(const CheckpointFile& ckpt) {
    return TrainConfig::from_json(ckpt.meta.at("config"));
  }

 private:
  void guard_finite(const TensorF& loss, const char* what) const {
    if (!std::isfinite(static_cast<double>(loss.item()))) {
      try {
        save_checkpoint("svs_crash_dump.ckpt");
      } catch (...) {
      }
      throw NumericError(std::string("trainer: non-finite ") + what +
                         " at iteration " + std::to_string(iteration_) +
                         " (state dumped to svs_crash_dump.ckpt)");
    }
  }

  TrainConfig cfg_;
  NetConfig net_cfg_;
  Dataset data_;
  Rng init_rng_, train_rng_;
  ParamStore<float> gen_params_, disc_params_;
  MelSynNet<float> melsyn_;
  SRNet<float> sr_;
  Discriminator<float> disc_;
  AdamState<float> gen_state_, disc_state_;
  std::vector<CropItem> cached_batch_;
  int64_t iteration_ = 0;
};

// Runs the loop with JSON-lines metrics and periodic checkpoints.
inline void train_loop(Trainer& trainer, int iters,
                       const std::filesystem::path& out_dir,
                       std::function<void(int64_t, const TrainMetrics&)> on_step = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::ofstream log(out_dir / "metrics.jsonl", std::ios::app);
  if (!log) throw IoError("train_loop: cannot open metrics log");
  for (int i = 0; i < iters; ++i) {
    TrainMetrics m = trainer.step();
    int64_t iter = trainer.iteration();
    nlohmann::json j{{"iter", iter}};
    for (const auto& [k, v] : m.to_map()) j[k] = v;
    log << j.dump() << "\n";
    if (trainer.config().validate_every > 0 &&
        iter % trainer.config().validate_every == 0) {
      ValMetrics v = trainer.validate();
      nlohmann::json jv{{"iter", iter},       {"val_L1_mel", v.l1_mel},
                        {"val_Ld_mel", v.ld_mel}, {"val_L_att", v.l_att},
                        {"val_L1_diff", v.l1_diff}, {"val_L1_sr", v.l1_sr},
                        {"val_Ld_sr", v.ld_sr}};
      log << jv.dump() << "\n";
    }
    if (trainer.config().checkpoint_every > 0 &&
        iter % trainer.config().checkpoint_every == 0)
      trainer.save_checkpoint(out_dir / ("ckpt_" + std::to_string(iter) + ".svsk"));
    if (on_step) on_step(iter, m);
  }
  log.flush();
  trainer.save_checkpoint(out_dir / "ckpt_final.svsk");
}

}  // namespace svs
