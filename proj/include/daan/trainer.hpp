// Alternating optimisation of the recognition network against the four
// domain discriminators.
//
// One train step:
//   phase A  discriminator terms on detached features / attention stacks
//            (and the translator's L_D), one Adam step on the
//            discriminators;
//   phase B  task, label-consistency, translator L_G and extractor-side
//            consistency terms through the updated (frozen) discriminators,
//            one SGD step on extractor + heads at lr_at(step) and, for a
//            learned translator, one Adam step on its generators.
// Ablated terms are reported as exactly 0 and never enter a graph.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "daan/attention.hpp"
#include "daan/batches.hpp"
#include "daan/losses.hpp"
#include "daan/model.hpp"
#include "daan/translator.hpp"

namespace daan {

enum class Method { source_only, target_only, daan_l, daan_f, daan_a, daan_lf, daan_la, daan_lfa };

std::string to_string(Method m);
Method method_from_string(const std::string& s);
const std::vector<Method>& all_methods();

struct AblationFlags {
  bool use_translator = false;  // translated branches and Lc_s2t
  bool use_label = false;
  bool use_feat = false;
  bool use_att = false;

  bool operator==(const AblationFlags&) const = default;
};
AblationFlags flags_for(Method m);

struct TrainConfig {
  int batch_size = 40;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double poly_power = 0.75;
  double disc_lr = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.99;
  /// Adam rate of a learned translator's generators.
  double translator_lr = 1e-4;
  LossWeights weights;
  std::int64_t total_steps = 1;
  std::uint64_t seed = 0;
  Method method = Method::daan_lfa;
  TranslatorMode translator = TranslatorMode::analytic;
  ModelConfig model;
  /// Write an intermediate checkpoint every K steps in fit(); 0 disables.
  std::int64_t checkpoint_every = 0;
  /// Per-step parameter snapshots asserting each phase only moves its own
  /// parameter set (slow; for tests).
  bool verify_phases = false;

  AblationFlags flags() const { return flags_for(method); }
  void validate() const;

  /// Full-scale configuration: ResNet-50 backbone, batch 40, SGD 0.05 /
  /// momentum 0.9 / decay 5e-4, poly power 0.75, Adam 1e-4, λ_l 0.02,
  /// λ_f 0.1, λ_a 0.1, discriminator widths 64-128-256-512-1.
  static TrainConfig full_scale();
  /// CPU-sized configuration for the synthetic shapes data.
  static TrainConfig desk_scale();
};

/// lr0 * (1 - step/total)^power. Throws for step outside [0, total_steps].
double lr_at(std::int64_t step, const TrainConfig& config);

/// Every term the step builds, as live tensors. Ablated terms are undefined.
struct StepGraph {
  // phase A (discriminator side, inputs detached)
  torch::Tensor feat_adv_s, feat_adv_t, att_adv_s, att_adv_t, translator_d;
  // phase B (extractor side)
  torch::Tensor lc_s, lc_s2t, lab_consis, translator_g;
  torch::Tensor feat_consis_s, feat_consis_t, att_consis_s, att_consis_t;

  torch::Tensor discriminator_objective(const LossWeights& w) const;
  torch::Tensor main_objective(const LossWeights& w) const;
};

class Trainer {
 public:
  /// Seeds torch with config.seed and builds fresh parameters.
  Trainer(TrainConfig config, AttributeSchema schema, std::unique_ptr<Translator> translator);

  /// One alternating step. `target` is ignored by source_only/target_only.
  LossReport train_step(const LabeledBatch& source, const ImageBatch* target);

  /// Phase A terms for the current parameters (does not update anything).
  StepGraph build_discriminator_terms(const LabeledBatch& source, const ImageBatch* target);
  /// Both phases' terms for the current parameters, without updates. The
  /// phase B terms are built with every discriminator frozen.
  StepGraph build_terms(const LabeledBatch& source, const ImageBatch* target);

  std::int64_t step() const { return step_; }
  const TrainConfig& config() const { return config_; }
  const AttributeSchema& schema() const { return schema_; }
  DaanNet& net() { return net_; }
  Translator& translator() { return *translator_; }

  /// Every parameter the main optimiser (and generator optimiser) updates.
  std::vector<torch::Tensor> main_side_parameters() const;
  /// Every parameter the discriminator optimiser updates.
  std::vector<torch::Tensor> discriminator_side_parameters() const;

  void save(const std::string& path) const;
  /// Restores parameters, optimiser states and step. Throws on schema hash
  /// mismatch.
  void load(const std::string& path);

 private:
  struct Forward;
  Forward run_forward(const LabeledBatch& source, const ImageBatch* target);
  void add_discriminator_terms(const Forward& f, StepGraph& g);
  void add_main_terms(const Forward& f, const LabeledBatch& source, StepGraph& g);

  TrainConfig config_;
  AttributeSchema schema_;
  std::unique_ptr<Translator> translator_;
  DaanNet net_{nullptr};
  std::unique_ptr<torch::optim::SGD> main_opt_;
  std::unique_ptr<torch::optim::Adam> disc_opt_;
  std::unique_ptr<torch::optim::Adam> gen_opt_;
  std::int64_t step_ = 0;
};

struct FitResult {
  std::string checkpoint;
  std::vector<LossReport> history;
};

/// Runs steps trainer.step() .. total_steps over the paired batch stream,
/// writing `<out_dir>/train_log.csv`, periodic checkpoints
/// `<out_dir>/checkpoint_<step>.pt` and `<out_dir>/checkpoint.pt`.
/// For target_only pass the labeled target set as `source` and no view.
FitResult fit(Trainer& trainer, const Dataset& source, const std::optional<UnlabeledView>& target,
              const std::string& out_dir);

/// In-memory variant (no files): runs `steps` steps from trainer.step().
std::vector<LossReport> run_steps(Trainer& trainer, const Dataset& source,
                                  const std::optional<UnlabeledView>& target, std::int64_t steps);

/// Builds the translator a config asks for. Analytic mode needs the
/// renderer config; frozen mode loads manifests when both paths are given
/// and is the identity otherwise.
std::unique_ptr<Translator> make_translator(const TrainConfig& config, const SynthConfig* synth,
                                            const std::string& frozen_s2t = {},
                                            const std::string& frozen_t2s = {},
                                            const AttributeSchema* schema = nullptr);

}  // namespace daan
