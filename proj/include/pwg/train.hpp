#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pwg/checkpoint.hpp"
#include "pwg/config.hpp"
#include "pwg/dsp.hpp"
#include "pwg/losses.hpp"
#include "pwg/models.hpp"
#include "pwg/rng.hpp"

namespace pwg {

// One rectified-Adam update on a flat parameter array. t is the 1-based
// update count. If the rectification term rho_t stays at or below 4 the
// update falls back to un-adapted momentum SGD. Non-finite gradients abort.
void radam_step(double* param, const double* grad, double* m, double* v, std::size_t n,
                const OptimizerConfig& oc, double lr, std::uint64_t t);

class RAdam {
 public:
  RAdam(ParamList params, OptimizerConfig oc);

  // Applies one update from the gradients currently on the parameters.
  void step(double lr);

  std::uint64_t update_count() const { return t_; }
  void set_update_count(std::uint64_t t) { t_ = t; }
  const ParamList& params() const { return params_; }
  std::vector<std::vector<double>>& moments_m() { return m_; }
  std::vector<std::vector<double>>& moments_v() { return v_; }

 private:
  ParamList params_;
  OptimizerConfig oc_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

// lr(t) = lr0 * 2^(-floor(t / decay_half_every)), exact halving.
double scheduled_lr(double lr0, std::uint64_t step, std::uint64_t decay_half_every);

struct TrainingClip {
  AudioClip audio;
  Tensor mel;  // normalized, [n_mels x F]
};

struct BatchItem {
  Tensor z;    // [1 x clip_samples], fresh N(0,1)
  Tensor mel;  // [n_mels x clip_samples/hop]
  Tensor x;    // [clip_samples] target slice
};

// Uniformly samples an eligible clip and a hop-aligned offset per item.
// Eligible clips hold at least clip_samples + mel frame length samples.
std::vector<BatchItem> make_batch(const std::vector<TrainingClip>& corpus,
                                  const ScheduleConfig& sc, const MelConfig& mc, Rng& rng);

struct StepMetrics {
  std::uint64_t step = 0;
  double lr_g = 0, lr_d = 0;
  double l_aux = 0, l_adv = 0, l_d = 0;
  std::vector<double> l_sc, l_mag;  // per resolution

  std::string to_line() const;  // key=value record, %.17g floats
};

class Trainer {
 public:
  Trainer(const RunConfig& cfg, std::vector<TrainingClip> corpus, FeatureStats stats);

  // Resume from a checkpoint produced by save().
  void restore(const Checkpoint& ckpt);
  Checkpoint make_checkpoint() const;

  StepMetrics train_step();
  std::uint64_t step() const { return step_; }

  Generator& generator() { return gen_; }
  Discriminator& discriminator() { return disc_; }
  const FeatureStats& stats() const { return stats_; }
  const RunConfig& config() const { return cfg_; }

 private:
  RunConfig cfg_;
  MelConfig mel_cfg_;
  MultiResConfig mrc_;
  ScheduleConfig sc_;
  OptimizerConfig oc_;
  std::vector<TrainingClip> corpus_;
  FeatureStats stats_;
  Rng rng_batch_;
  Generator gen_;
  Discriminator disc_;
  RAdam opt_g_, opt_d_;
  std::uint64_t step_ = 0;
};

// Full loop: initializes (or resumes), trains to total_steps, appends one
// metrics record per step to <out_dir>/metrics.txt and writes
// checkpoint-NNNNNN.pwg every checkpoint_interval steps plus at step 0 and
// at the end. Returns the final checkpoint path.
std::string run_training(const RunConfig& cfg, const std::string& data_dir,
                         const std::string& out_dir,
                         const std::optional<std::string>& resume_path = std::nullopt,
                         const std::optional<std::string>& stats_path = std::nullopt);

// Sorted .wav files of a directory.
std::vector<std::string> list_wavs(const std::string& dir);

// Load clips and attach normalized mel features.
std::vector<TrainingClip> load_training_corpus(const std::vector<std::string>& wav_paths,
                                               const MelConfig& mc, const FeatureStats& stats);

}  // namespace pwg
