#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "dcton/data.hpp"
#include "dcton/losses.hpp"
#include "dcton/nets.hpp"

namespace dcton::train {

struct TrainConfig {
  int epochs = 100;
  double lr = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  losses::LambdaConfig lambdas;
  int batch_size = 4;
  std::uint64_t seed = 0;
  bool ablate_skin_encoder = false;
  bool ablate_stn_reg = false;
  int checkpoint_every = 10;
  // STN pretraining schedule.
  int stn_steps = 1000;
  double stn_lr = 1e-4;

  void validate() const;
  std::map<std::string, std::string> to_map() const;
  /// Unknown keys raise InvalidArgument.
  static TrainConfig from_map(const std::map<std::string, std::string>& kv);
};

/// Flat key=value text; '#' starts a comment.
TrainConfig read_config(const std::filesystem::path& path);
void write_config(const std::filesystem::path& path, const TrainConfig& config);

/// Stacked sample tensors for one step.
struct Batch {
  torch::Tensor person;          // I1
  torch::Tensor skin;            // S1
  torch::Tensor clothes_self;    // C1
  torch::Tensor clothes_target;  // C2
  torch::Tensor descriptor;      // D
  torch::Tensor parse;           // [B,H,W]

  nets::MaskPair layout() const;  // ground-truth clothes/skin masks from the parse
};

/// `targets[i]` names the sample whose own clothes become C2 for sample
/// `indices[i]`; without targets each sample's stored target clothes are used.
Batch make_batch(const std::vector<data::TryOnSample>& dataset, std::span<const int> indices,
                 std::span<const int> targets = {});

/// Same clothes in and out: C2 = C1.
Batch self_tryon_batch(const std::vector<data::TryOnSample>& dataset, std::span<const int> indices);

/// Deterministic helper streams keyed by (seed, epoch).
std::vector<int> epoch_order(int n, std::uint64_t seed, int epoch);
std::vector<int> epoch_targets(int n, std::uint64_t seed, int epoch);

struct StnPretrainResult {
  nets::Stn stn{nullptr};
  std::vector<losses::LossReport> log;  // stn_a / stn_rb per step
};

/// Optimizes L_a + R_b on paired (C1, I1) data with exact parse masks.
StnPretrainResult pretrain_stn(const std::vector<data::TryOnSample>& dataset,
                               const TrainConfig& config);

nets::Checkpoint stn_checkpoint(const nets::Stn& stn, const TrainConfig& config);
nets::Stn load_stn(const nets::Checkpoint& ckpt);

struct Diverged : std::runtime_error {
  Diverged(const std::string& what, losses::LossReport last)
      : std::runtime_error(what), last(last) {}
  losses::LossReport last;
};

/// Intermediates of one disentangled cycle.
struct CycleState {
  nets::GeneratorOutput forward;   // I2, M1 pair, T
  torch::Tensor skin_fwd;          // S2 = M1_skin * I2
  nets::GeneratorOutput backward;  // I1<-, M2 pair
  torch::Tensor skin_back;         // S1<- = M2_skin * I1<-
};

/// Owns the generator, both discriminators, their optimizers and the perceptual
/// extractor. The STN inside the model is frozen.
class CycleTrainer {
 public:
  CycleTrainer(const TrainConfig& config, const nets::Stn& pretrained_stn);

  /// One generator update followed by one update of each discriminator.
  losses::LossReport step(const Batch& batch);
  /// Losses at the current weights, no update.
  losses::LossReport evaluate(const Batch& batch);
  CycleState run_cycle(const Batch& batch);

  nets::TryOnModel& model() { return model_; }
  nets::PatchDiscriminator& person_discriminator() { return disc_person_; }
  nets::PatchDiscriminator& skin_discriminator() { return disc_skin_; }
  std::int64_t iteration() const { return iteration_; }
  const TrainConfig& config() const { return config_; }

  /// Model, discriminator and optimizer state; `epoch` is recorded in the config echo.
  nets::Checkpoint checkpoint(int epoch) const;
  /// Restores everything saved by checkpoint() and returns the stored epoch.
  int restore(const nets::Checkpoint& ckpt);

 private:
  struct Losses {
    losses::LossReport report;
    torch::Tensor objective;
    CycleState state;
  };
  Losses compute(const Batch& batch);

  TrainConfig config_;
  nets::TryOnModel model_{nullptr};
  nets::PatchDiscriminator disc_person_{nullptr};
  nets::PatchDiscriminator disc_skin_{nullptr};
  std::unique_ptr<torch::optim::Adam> opt_gen_;
  std::unique_ptr<torch::optim::Adam> opt_person_;
  std::unique_ptr<torch::optim::Adam> opt_skin_;
  std::unique_ptr<losses::FeatureExtractor> extractor_;
  std::int64_t iteration_ = 0;
};

struct TrainOutcome {
  std::vector<losses::LossReport> log;
  std::filesystem::path final_checkpoint;
  int epochs_completed = 0;
};

/// Epoch loop with per-epoch shuffling and random target clothes. Writes
/// loss_log.csv and checkpoints/epoch_NNNN every `checkpoint_every` epochs and
/// after the last one; latest.txt names the newest checkpoint.
/// `resume_from` continues a previous run from one of its checkpoints.
TrainOutcome train_dcton(const std::vector<data::TryOnSample>& dataset,
                         const nets::Stn& pretrained_stn, const TrainConfig& config,
                         const std::filesystem::path& out_dir,
                         const std::optional<std::filesystem::path>& resume_from = std::nullopt,
                         const std::function<void(const losses::LossReport&)>& on_step = {});

inline constexpr const char* kLossLogHeader = "iteration,adv,cyc,pre,vgg,mpn,total";
std::string loss_log_row(const losses::LossReport& r);
std::vector<losses::LossReport> read_loss_log(const std::filesystem::path& path);

/// Loads a cycle-training checkpoint into a fresh model for inference.
nets::TryOnModel load_model(const nets::Checkpoint& ckpt);

}  // namespace dcton::train
