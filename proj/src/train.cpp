#include "pwg/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pwg/common.hpp"

namespace pwg {

void radam_step(double* param, const double* grad, double* m, double* v, std::size_t n,
                const OptimizerConfig& oc, double lr, std::uint64_t t) {
  if (t == 0) throw std::invalid_argument("radam_step: t must be >= 1");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grad[i])) throw NumericError("radam_step: non-finite gradient");
  }
  const double b1 = oc.beta1, b2 = oc.beta2;
  const double b1t = std::pow(b1, static_cast<double>(t));
  const double b2t = std::pow(b2, static_cast<double>(t));
  const double rho_inf = 2.0 / (1.0 - b2) - 1.0;
  const double rho_t =
      rho_inf - 2.0 * static_cast<double>(t) * b2t / (1.0 - b2t);
  const double m_corr = 1.0 / (1.0 - b1t);
  if (rho_t > 4.0) {
    const double r_num = (rho_t - 4.0) * (rho_t - 2.0) * rho_inf;
    const double r_den = (rho_inf - 4.0) * (rho_inf - 2.0) * rho_t;
    const double rect = std::sqrt(r_num / r_den);
    const double v_corr = 1.0 / (1.0 - b2t);
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
      v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
      const double mhat = m[i] * m_corr;
      const double vhat = std::sqrt(v[i] * v_corr);
      param[i] -= lr * rect * mhat / (vhat + oc.eps);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
      v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
      param[i] -= lr * m[i] * m_corr;
    }
  }
}

RAdam::RAdam(ParamList params, OptimizerConfig oc) : params_(std::move(params)), oc_(oc) {
  oc_.validate();
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void RAdam::step(double lr) {
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& t = params_[i].tensor;
    if (!t.has_grad()) {
      throw NumericError("radam: missing gradient for " + params_[i].name);
    }
    radam_step(t.mutable_data().data(), t.grad().data(), m_[i].data(), v_[i].data(), t.numel(),
               oc_, lr, t_);
  }
}

double scheduled_lr(double lr0, std::uint64_t step, std::uint64_t decay_half_every) {
  const auto k = static_cast<int>(step / decay_half_every);
  return std::ldexp(lr0, -k);
}

// ---------------------------------------------------------------------------
// Batching

std::vector<BatchItem> make_batch(const std::vector<TrainingClip>& corpus,
                                  const ScheduleConfig& sc, const MelConfig& mc, Rng& rng) {
  if (corpus.empty()) throw DataError("make_batch: empty corpus");
  if (sc.clip_samples % mc.hop != 0)
    throw ConfigError("make_batch: clip_samples must be a multiple of hop");
  const std::size_t min_len = sc.clip_samples + mc.frame;
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].audio.size() >= min_len) eligible.push_back(i);
  }
  if (eligible.empty())
    throw DataError("make_batch: no clip holds clip_samples + one mel frame (" +
                    std::to_string(min_len) + " samples)");

  const std::size_t frames_per_item = sc.clip_samples / mc.hop;
  std::vector<BatchItem> batch;
  batch.reserve(sc.batch_size);
  for (std::size_t b = 0; b < sc.batch_size; ++b) {
    const TrainingClip& clip = corpus[eligible[rng.uniform_index(eligible.size())]];
    // hop-aligned offsets keeping the sliced mel frames fully inside the clip
    const std::size_t max_off = clip.audio.size() - sc.clip_samples - (mc.frame - mc.hop);
    const std::size_t n_off = max_off / mc.hop + 1;
    const std::size_t offset = rng.uniform_index(n_off) * mc.hop;
    const std::size_t f0 = offset / mc.hop;

    BatchItem item;
    item.x = Tensor::from_data(
        {sc.clip_samples},
        std::vector<double>(clip.audio.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                            clip.audio.samples.begin() +
                                static_cast<std::ptrdiff_t>(offset + sc.clip_samples)));
    const std::size_t bands = clip.mel.extent(0);
    const std::size_t total_frames = clip.mel.extent(1);
    std::vector<double> mel_slice(bands * frames_per_item);
    const double* src = clip.mel.data().data();
    for (std::size_t m = 0; m < bands; ++m) {
      const double* row = src + m * total_frames + f0;
      std::copy(row, row + frames_per_item, mel_slice.data() + m * frames_per_item);
    }
    item.mel = Tensor::from_data({bands, frames_per_item}, std::move(mel_slice));
    item.z = Tensor::randn({1, sc.clip_samples}, rng);
    batch.push_back(std::move(item));
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Metrics

std::string StepMetrics::to_line() const {
  std::string out;
  char buf[64];
  auto kv = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), " %s=%.17g", key, v);
    out += buf;
  };
  std::snprintf(buf, sizeof(buf), "step=%llu", static_cast<unsigned long long>(step));
  out += buf;
  kv("lr_g", lr_g);
  kv("lr_d", lr_d);
  kv("l_aux", l_aux);
  kv("l_adv", l_adv);
  kv("l_d", l_d);
  for (std::size_t i = 0; i < l_sc.size(); ++i) {
    std::snprintf(buf, sizeof(buf), " l_sc_%zu=%.17g", i, l_sc[i]);
    out += buf;
    std::snprintf(buf, sizeof(buf), " l_mag_%zu=%.17g", i, l_mag[i]);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(const RunConfig& cfg, std::vector<TrainingClip> corpus, FeatureStats stats)
    : cfg_(cfg),
      mel_cfg_(cfg.mel()),
      mrc_(cfg.multi_res()),
      sc_(cfg.schedule()),
      oc_(cfg.optimizer()),
      corpus_(std::move(corpus)),
      stats_(std::move(stats)),
      rng_batch_(Rng::derive(cfg.seed, 3)),
      gen_([&] {
        Rng r = Rng::derive(cfg.seed, 1);
        return Generator(cfg.generator(), r);
      }()),
      disc_([&] {
        Rng r = Rng::derive(cfg.seed, 2);
        return Discriminator(cfg.discriminator(), r);
      }()),
      opt_g_(gen_.parameters(), cfg.optimizer()),
      opt_d_(disc_.parameters(), cfg.optimizer()) {
  cfg_.validate();
}

StepMetrics Trainer::train_step() {
  const double lr_g = scheduled_lr(oc_.lr_g, step_, oc_.decay_half_every);
  const double lr_d = scheduled_lr(oc_.lr_d, step_, oc_.decay_half_every);
  const bool frozen = step_ < sc_.d_frozen_steps;
  const double inv_b = 1.0 / static_cast<double>(sc_.batch_size);

  std::vector<BatchItem> batch = make_batch(corpus_, sc_, mel_cfg_, rng_batch_);

  StepMetrics metrics;
  metrics.step = step_;
  metrics.lr_g = lr_g;
  metrics.lr_d = lr_d;
  metrics.l_sc.assign(mrc_.resolutions.size(), 0.0);
  metrics.l_mag.assign(mrc_.resolutions.size(), 0.0);

  auto tally_aux = [&](const MultiResLossParts& parts) {
    metrics.l_aux += parts.total.value() * inv_b;
    for (std::size_t m = 0; m < parts.parts.size(); ++m) {
      metrics.l_sc[m] += parts.parts[m].sc.value() * inv_b;
      metrics.l_mag[m] += parts.parts[m].mag.value() * inv_b;
    }
  };

  if (frozen) {
    // Auxiliary phase: the generator trains on the multi-resolution STFT
    // loss alone; the discriminator is untouched.
    gen_.zero_grad();
    for (const BatchItem& item : batch) {
      Tensor xhat = gen_.forward(item.z, item.mel);
      MultiResLossParts parts =
          multi_res_stft_loss_parts(item.x, reshape(xhat, {xhat.extent(1)}), mrc_);
      tally_aux(parts);
      Tensor loss = scale(parts.total, inv_b);
      if (!std::isfinite(loss.value()))
        throw NumericError("train_step: non-finite generator loss at step " +
                           std::to_string(step_));
      backward(loss, /*trim_values=*/true);
    }
    opt_g_.step(lr_g);
  } else {
    // Joint phase, discriminator first on detached generator outputs.
    std::vector<Tensor> fakes;
    fakes.reserve(batch.size());
    for (const BatchItem& item : batch) fakes.push_back(gen_.forward(item.z, item.mel));

    disc_.zero_grad();
    for (std::size_t b = 0; b < batch.size(); ++b) {
      Tensor d_real = disc_.forward(reshape(batch[b].x, {1, batch[b].x.numel()}));
      Tensor d_fake = disc_.forward(fakes[b].detach());
      Tensor ld = loss_discriminator(d_real, d_fake);
      metrics.l_d += ld.value() * inv_b;
      Tensor loss = scale(ld, inv_b);
      if (!std::isfinite(loss.value()))
        throw NumericError("train_step: non-finite discriminator loss at step " +
                           std::to_string(step_));
      backward(loss, /*trim_values=*/true);
    }
    opt_d_.step(lr_d);

    // Generator update against the refreshed discriminator, whose
    // parameters are frozen out of this backward pass.
    gen_.zero_grad();
    disc_.set_trainable(false);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      MultiResLossParts parts = multi_res_stft_loss_parts(
          batch[b].x, reshape(fakes[b], {fakes[b].extent(1)}), mrc_);
      tally_aux(parts);
      Tensor d_out = disc_.forward(fakes[b]);
      Tensor ladv = adv_loss_generator(d_out);
      metrics.l_adv += ladv.value() * inv_b;
      Tensor total = loss_generator_total(parts.total, ladv, LossWeights{sc_.lambda_adv});
      Tensor loss = scale(total, inv_b);
      if (!std::isfinite(loss.value()))
        throw NumericError("train_step: non-finite generator loss at step " +
                           std::to_string(step_));
      backward(loss, /*trim_values=*/true);
    }
    disc_.set_trainable(true);
    opt_g_.step(lr_g);
  }

  ++step_;
  return metrics;
}

// ---------------------------------------------------------------------------
// Checkpointing

Checkpoint Trainer::make_checkpoint() const {
  Checkpoint ckpt;
  ckpt.step = step_;
  ckpt.config = cfg_.to_map();
  ckpt.stats = stats_;
  ckpt.rng_states["batch"] = rng_batch_.state();
  ckpt.counters["opt_g_t"] = opt_g_.update_count();
  ckpt.counters["opt_d_t"] = opt_d_.update_count();

  auto& self = const_cast<Trainer&>(*this);
  auto dump = [&](RAdam& opt, const char* tag) {
    const ParamList& params = opt.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      ckpt.tensors.push_back(
          {params[i].name, params[i].tensor.shape(), params[i].tensor.data()});
      ckpt.tensors.push_back({std::string(tag) + "/m/" + params[i].name,
                              params[i].tensor.shape(), opt.moments_m()[i]});
      ckpt.tensors.push_back({std::string(tag) + "/v/" + params[i].name,
                              params[i].tensor.shape(), opt.moments_v()[i]});
    }
  };
  dump(self.opt_g_, "opt_g");
  dump(self.opt_d_, "opt_d");
  return ckpt;
}

void Trainer::restore(const Checkpoint& ckpt) {
  step_ = ckpt.step;
  if (!ckpt.stats.mean.empty()) stats_ = ckpt.stats;
  auto rng_it = ckpt.rng_states.find("batch");
  if (rng_it == ckpt.rng_states.end())
    throw DataError("checkpoint: missing batch RNG state");
  rng_batch_.set_state(rng_it->second);
  opt_g_.set_update_count(ckpt.counters.count("opt_g_t") ? ckpt.counters.at("opt_g_t") : 0);
  opt_d_.set_update_count(ckpt.counters.count("opt_d_t") ? ckpt.counters.at("opt_d_t") : 0);

  auto load = [&](RAdam& opt, const char* tag) {
    const ParamList& params = opt.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const CheckpointTensor* p = ckpt.find(params[i].name);
      const CheckpointTensor* m = ckpt.find(std::string(tag) + "/m/" + params[i].name);
      const CheckpointTensor* v = ckpt.find(std::string(tag) + "/v/" + params[i].name);
      if (!p || !m || !v)
        throw DataError("checkpoint: missing tensor " + params[i].name);
      if (p->data.size() != params[i].tensor.numel())
        throw DataError("checkpoint: shape mismatch for " + params[i].name +
                        " (config/checkpoint disagree)");
      params[i].tensor.mutable_data() = p->data;
      opt.moments_m()[i] = m->data;
      opt.moments_v()[i] = v->data;
    }
  };
  load(opt_g_, "opt_g");
  load(opt_d_, "opt_d");
}

// ---------------------------------------------------------------------------
// Corpus loading and the outer loop

std::vector<std::string> list_wavs(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("corpus: not a directory: " + dir);
  std::vector<std::string> paths;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") {
      paths.push_back(e.path().string());
    }
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw DataError("corpus: no .wav files in " + dir);
  return paths;
}

std::vector<TrainingClip> load_training_corpus(const std::vector<std::string>& wav_paths,
                                               const MelConfig& mc, const FeatureStats& stats) {
  std::vector<TrainingClip> corpus;
  corpus.reserve(wav_paths.size());
  for (const auto& p : wav_paths) {
    TrainingClip clip;
    clip.audio = read_wav(p);
    if (clip.audio.size() < mc.frame) continue;  // too short even for one frame
    clip.mel = mel_spectrogram(clip.audio, mc, &stats);
    corpus.push_back(std::move(clip));
  }
  if (corpus.empty()) throw DataError("corpus: no usable clips");
  return corpus;
}

namespace {
std::string checkpoint_name(const std::string& out_dir, std::uint64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "checkpoint-%06llu.pwg",
                static_cast<unsigned long long>(step));
  return out_dir + "/" + buf;
}
}  // namespace

std::string run_training(const RunConfig& cfg, const std::string& data_dir,
                         const std::string& out_dir,
                         const std::optional<std::string>& resume_path,
                         const std::optional<std::string>& stats_path) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  const MelConfig mc = cfg.mel();
  const auto wavs = list_wavs(data_dir);

  FeatureStats stats;
  if (resume_path) {
    // stats come from the checkpoint below
  } else if (stats_path) {
    stats = load_stats(*stats_path);
  } else {
    std::vector<AudioClip> clips;
    clips.reserve(wavs.size());
    for (const auto& p : wavs) clips.push_back(read_wav(p));
    stats = compute_stats(clips, mc);
  }

  std::optional<Checkpoint> resume;
  if (resume_path) {
    resume = load_checkpoint(*resume_path);
    const RunConfig stored = RunConfig::from_map(resume->config);
    if (stored.to_map() != cfg.to_map())
      throw DataError("resume: config does not match the checkpoint's config echo");
    stats = resume->stats;
  }

  Trainer trainer(cfg, load_training_corpus(wavs, mc, stats), stats);
  if (resume) trainer.restore(*resume);

  {
    std::ofstream echo(out_dir + "/config.txt", std::ios::trunc);
    echo << cfg.echo();
  }

  std::ofstream metrics(out_dir + "/metrics.txt", std::ios::app);
  if (!metrics) throw DataError("train: cannot write metrics in " + out_dir);

  const ScheduleConfig sc = cfg.schedule();
  if (trainer.step() == 0) {
    save_checkpoint(checkpoint_name(out_dir, 0), trainer.make_checkpoint());
  }
  while (trainer.step() < sc.total_steps) {
    StepMetrics m = trainer.train_step();
    metrics << m.to_line() << '\n';
    metrics.flush();
    if (trainer.step() % sc.checkpoint_interval == 0 && trainer.step() < sc.total_steps) {
      save_checkpoint(checkpoint_name(out_dir, trainer.step()), trainer.make_checkpoint());
    }
  }
  const std::string final_path = checkpoint_name(out_dir, trainer.step());
  save_checkpoint(final_path, trainer.make_checkpoint());
  return final_path;
}

}  // namespace pwg
