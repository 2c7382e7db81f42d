// Command-line front end: dataset generation, training, synthesis,
// evaluation, spectrogram plotting, and the gradient-check battery.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "svs/gradcheck_suite.hpp"
#include "svs/image.hpp"
#include "svs/svs.hpp"

namespace fs = std::filesystem;
using namespace svs;

namespace {

struct LoadedModel {
  TrainConfig cfg;
  std::unique_ptr<ParamStore<float>> params;
  std::unique_ptr<MelSynNet<float>> melsyn;
  std::unique_ptr<SRNet<float>> sr;
};

LoadedModel load_model(const fs::path& checkpoint_path) {
  CheckpointFile ckpt = checkpoint_load(checkpoint_path);
  LoadedModel m;
  m.cfg = Trainer::checkpoint_config(ckpt);
  m.params = std::make_unique<ParamStore<float>>();
  Rng init(m.cfg.seed);
  m.melsyn = std::make_unique<MelSynNet<float>>(*m.params, m.cfg.net_config(), init);
  m.sr = std::make_unique<SRNet<float>>(*m.params, m.cfg.net_config(), init);
  unpack_params_only(ckpt, *m.params);
  return m;
}

TrainConfig load_train_config(const std::string& config_path,
                              std::optional<uint64_t> seed,
                              std::optional<int> iters,
                              const std::string& manifest) {
  TrainConfig cfg;
  if (!config_path.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(config_path));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("config: " + std::string(e.what()));
    }
    cfg = TrainConfig::from_json(j);
  }
  if (seed) cfg.seed = *seed;
  if (iters) cfg.total_iters = *iters;
  if (!manifest.empty()) cfg.manifest = manifest;
  return cfg;
}

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path))
    throw IoError(std::string(what) + " not found: " + path);
}

int run(int argc, char** argv) {
  CLI::App app{"singing voice synthesis toolkit"};
  app.require_subcommand(0, 1);
  bool version = false;
  app.add_flag("--version", version, "print version and exit");

  // dataset synth
  auto* dataset = app.add_subcommand("dataset", "dataset utilities");
  auto* dsynth = dataset->add_subcommand("synth", "generate a synthetic dataset");
  std::string ds_out;
  uint64_t ds_seed = 0;
  int ds_songs = 10;
  int ds_notes = 24;
  dsynth->add_option("--out", ds_out, "output directory")->required();
  dsynth->add_option("--seed", ds_seed, "generator seed");
  dsynth->add_option("--songs", ds_songs, "number of songs");
  dsynth->add_option("--notes", ds_notes, "notes per song");

  // train
  auto* train = app.add_subcommand("train", "train the model");
  std::string tr_manifest, tr_out, tr_config, tr_resume;
  std::optional<uint64_t> tr_seed;
  std::optional<int> tr_iters;
  train->add_option("--manifest", tr_manifest, "dataset manifest");
  train->add_option("--out", tr_out, "output directory")->required();
  train->add_option("--config", tr_config, "training config json");
  train->add_option("--checkpoint", tr_resume, "resume from checkpoint");
  train->add_option("--seed", tr_seed, "seed override");
  train->add_option("--iters", tr_iters, "total iterations override");

  // synth
  auto* synth = app.add_subcommand("synth", "synthesize a score to a wav file");
  std::string sy_ckpt, sy_score, sy_out;
  synth->add_option("--checkpoint", sy_ckpt, "model checkpoint")->required();
  synth->add_option("--score", sy_score, "score json")->required();
  synth->add_option("--out", sy_out, "output wav path")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "pitch precision/recall/F1 evaluation");
  std::string ev_ckpt, ev_manifest, ev_out, ev_split = "test", ev_csv;
  bool ev_ground = false;
  eval->add_option("--checkpoint", ev_ckpt, "model checkpoint");
  eval->add_option("--manifest", ev_manifest, "dataset manifest")->required();
  eval->add_option("--out", ev_out, "report json path");
  eval->add_option("--split", ev_split, "dataset split to evaluate");
  eval->add_option("--csv", ev_csv, "per-frame decisions csv");
  eval->add_flag("--ground", ev_ground, "evaluate the recorded audio itself");

  // plot
  auto* plot = app.add_subcommand("plot", "render mask/dm/mel/linear images");
  std::string pl_ckpt, pl_score, pl_out;
  plot->add_option("--checkpoint", pl_ckpt, "model checkpoint")->required();
  plot->add_option("--score", pl_score, "score json")->required();
  plot->add_option("--out", pl_out, "output directory")->required();

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference battery");
  double gc_eps = 1e-5;
  gradcheck->add_option("--eps", gc_eps, "perturbation size");

  CLI11_PARSE(app, argc, argv);

  if (version) {
    std::printf("svs %s\n", kVersion);
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return 1;
  }

  if (dsynth->parsed()) {
    SynthSongConfig cfg;
    cfg.seed = ds_seed;
    cfg.note_count = ds_notes;
    fs::path manifest = write_synthetic_dataset(ds_out, cfg, ds_songs);
    std::printf("wrote %d songs, manifest: %s\n", ds_songs,
                manifest.string().c_str());
    return 0;
  }

  if (train->parsed()) {
    if (!tr_resume.empty()) require_file(tr_resume, "checkpoint");
    TrainConfig cfg;
    std::optional<CheckpointFile> resume;
    if (!tr_resume.empty()) {
      resume = checkpoint_load(tr_resume);
      cfg = Trainer::checkpoint_config(*resume);
      if (!tr_manifest.empty()) cfg.manifest = tr_manifest;
      if (tr_iters) cfg.total_iters = *tr_iters;
    } else {
      cfg = load_train_config(tr_config, tr_seed, tr_iters, tr_manifest);
    }
    if (cfg.manifest.empty())
      throw ValueError("train: a manifest is required (--manifest or config)");
    require_file(cfg.manifest, "manifest");
    Trainer trainer(cfg, Dataset::load(cfg.manifest));
    if (resume) trainer.load_checkpoint_state(*resume);
    int remaining = cfg.total_iters - static_cast<int>(trainer.iteration());
    if (remaining <= 0) {
      std::printf("nothing to do: iteration %lld >= total %d\n",
                  static_cast<long long>(trainer.iteration()), cfg.total_iters);
      return 0;
    }
    std::printf("training %d iterations (d=%d, batch=%d)\n", remaining,
                cfg.d_model, cfg.batch_size);
    train_loop(trainer, remaining, tr_out, [](int64_t iter, const TrainMetrics& m) {
      if (iter % 100 == 0)
        std::printf("iter %6lld  L1_mel %.4f  L1_sr %.4f  lr_SR %.2f  lr_GAN %.2f\n",
                    static_cast<long long>(iter), m.l1_mel, m.l1_sr, m.lr_sr,
                    m.lr_gan);
    });
    std::printf("final checkpoint: %s\n",
                (fs::path(tr_out) / "ckpt_final.svsk").string().c_str());
    return 0;
  }

  if (synth->parsed()) {
    require_file(sy_ckpt, "checkpoint");
    require_file(sy_score, "score");
    LoadedModel m = load_model(sy_ckpt);
    Score score = parse_score_json(sy_score);
    Waveform wav = synthesize_score(*m.melsyn, *m.sr, score);
    write_wav(sy_out, wav);
    std::printf("wrote %s (%.2f s)\n", sy_out.c_str(),
                static_cast<double>(wav.samples.size()) / wav.sample_rate);
    return 0;
  }

  if (eval->parsed()) {
    require_file(ev_manifest, "manifest");
    Manifest manifest = Manifest::load(ev_manifest);
    EvalReport report;
    if (ev_ground) {
      report = evaluate_ground_truth(manifest, ev_split);
    } else {
      if (ev_ckpt.empty())
        throw ValueError("eval: --checkpoint is required unless --ground is given");
      require_file(ev_ckpt, "checkpoint");
      LoadedModel m = load_model(ev_ckpt);
      report = evaluate_model(*m.melsyn, *m.sr, manifest, ev_split);
    }
    std::printf("precision %.4f  recall %.4f  f1 %.4f over %zu clips\n",
                report.aggregate.precision, report.aggregate.recall,
                report.aggregate.f1, report.clips.size());
    if (!ev_out.empty()) {
      write_file_atomic(ev_out, report.to_json().dump(2) + "\n");
      std::printf("report: %s\n", ev_out.c_str());
    }
    if (!ev_csv.empty()) {
      std::string csv = "clip,frame,pred,ref,match\n";
      for (const auto& c : report.clips)
        for (size_t i = 0; i < c.pred.size(); ++i)
          csv += c.id + "," + std::to_string(i) + "," + std::to_string(c.pred[i]) +
                 "," + std::to_string(c.ref[i]) + "," +
                 (c.pred[i] != kUnvoicedFrame && c.pred[i] == c.ref[i] ? "1" : "0") +
                 "\n";
      write_file_atomic(ev_csv, csv);
      std::printf("per-frame csv: %s\n", ev_csv.c_str());
    }
    return 0;
  }

  if (plot->parsed()) {
    require_file(pl_ckpt, "checkpoint");
    require_file(pl_score, "score");
    LoadedModel m = load_model(pl_ckpt);
    Score score = parse_score_json(pl_score);
    double frame_dur = static_cast<double>(kCoarseHop) / score.sample_rate;
    int frames = static_cast<int>(std::ceil(score.span_seconds() / frame_dur)) + 2;
    auto aligned = align_frames(score, score.sample_rate, kCoarseHop, frames);
    NoGradGuard ng;
    RunMode mode;
    auto ms = synth_autoregressive(*m.melsyn, aligned.text, aligned.pitch, frames);
    auto cond = m.sr->make_conditioning(ms.text, ms.pitch_enc, mode);
    auto srout = m.sr->forward(ms.mel, cond, mode);
    fs::create_directories(pl_out);
    fs::path out(pl_out);
    for (const auto& [stem, tensor] :
         {std::pair<const char*, const TensorF&>{"mask", ms.mask},
          {"dm", ms.dm},
          {"mel", ms.mel},
          {"linear", srout.s_hat}}) {
      auto files = render_spectrogram_image(tensor, out / stem);
      for (const auto& f : files) std::printf("wrote %s\n", f.string().c_str());
    }
    return 0;
  }

  if (gradcheck->parsed()) {
    auto results = run_gradcheck_suite(gc_eps);
    double worst = 0;
    for (const auto& r : results) {
      std::printf("%-28s max_rel_err %.3e\n", r.name.c_str(), r.max_err);
      worst = std::max(worst, r.max_err);
    }
    bool ok = worst < 1e-4;
    std::printf("%s: worst %.3e over %zu checks\n", ok ? "PASS" : "FAIL", worst,
                results.size());
    return ok ? 0 : 1;
  }

  std::cerr << app.help();
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
