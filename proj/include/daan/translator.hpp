// Bi-directional image-to-image translation between the two domains.
//
// Three interchangeable implementations sit behind `Translator`:
//  - LearnedTranslator: residual cycle-consistent generators with patch
//    discriminators, trained jointly with the recognition network;
//  - FrozenTranslator: precomputed translations looked up by sample id,
//    or the identity when none are given;
//  - AnalyticTranslator: the exact style mapping of the synthetic renderer.
// Only the learned variant has parameters or non-zero losses.

#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "daan/dataset.hpp"
#include "daan/synth.hpp"

namespace daan {

enum class TranslatorMode { learned, frozen, analytic };

std::string to_string(TranslatorMode m);
TranslatorMode translator_mode_from_string(const std::string& s);

/// Generator-side and discriminator-side translator objectives plus the
/// generator's components.
struct TranslatorLosses {
  torch::Tensor generator;      // L_G
  torch::Tensor discriminator;  // L_D
  torch::Tensor adversarial;
  torch::Tensor cycle;
  torch::Tensor identity;
  bool active = false;
};

class Translator {
 public:
  virtual ~Translator() = default;
  virtual TranslatorMode mode() const = 0;

  /// Output has the input's shape with values in [0,1]. `ids` name the
  /// samples of the batch (used by the frozen and analytic variants).
  virtual torch::Tensor translate(const torch::Tensor& images, std::span<const std::string> ids,
                                  Direction direction) = 0;

  /// L_G on already translated batches (keeps their graphs).
  virtual torch::Tensor generator_loss(const torch::Tensor& x_s, const torch::Tensor& x_t,
                                       const torch::Tensor& x_s2t, const torch::Tensor& x_t2s,
                                       TranslatorLosses* parts = nullptr);
  /// L_D on already translated batches; the fakes are detached.
  virtual torch::Tensor discriminator_loss(const torch::Tensor& x_s, const torch::Tensor& x_t,
                                           const torch::Tensor& x_s2t, const torch::Tensor& x_t2s);
  /// Translates both batches and returns (L_G, L_D). Zero for non-learned modes.
  TranslatorLosses losses(const torch::Tensor& x_s, std::span<const std::string> ids_s, const torch::Tensor& x_t,
                          std::span<const std::string> ids_t);

  virtual std::vector<torch::Tensor> generator_parameters() const { return {}; }
  virtual std::vector<torch::Tensor> discriminator_parameters() const { return {}; }
  virtual void save(torch::serialize::OutputArchive&) const {}
  virtual void load(torch::serialize::InputArchive&) {}
};

struct LearnedTranslatorConfig {
  int channels = 1;
  int width = 32;
  int residual_blocks = 2;
  double cycle_weight = 10.0;
  double identity_weight = 5.0;
};

class ResidualGeneratorImpl : public torch::nn::Module {
 public:
  ResidualGeneratorImpl(int channels, int width, int blocks);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d in_{nullptr}, out_{nullptr};
  std::vector<torch::nn::Sequential> blocks_;
};
TORCH_MODULE(ResidualGenerator);

class PatchDiscriminatorImpl : public torch::nn::Module {
 public:
  PatchDiscriminatorImpl(int channels, int width);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(PatchDiscriminator);

class LearnedTranslator final : public Translator {
 public:
  explicit LearnedTranslator(const LearnedTranslatorConfig& config);
  TranslatorMode mode() const override { return TranslatorMode::learned; }
  torch::Tensor translate(const torch::Tensor& images, std::span<const std::string> ids,
                          Direction direction) override;
  torch::Tensor generator_loss(const torch::Tensor& x_s, const torch::Tensor& x_t, const torch::Tensor& x_s2t,
                               const torch::Tensor& x_t2s, TranslatorLosses* parts = nullptr) override;
  torch::Tensor discriminator_loss(const torch::Tensor& x_s, const torch::Tensor& x_t, const torch::Tensor& x_s2t,
                                   const torch::Tensor& x_t2s) override;
  std::vector<torch::Tensor> generator_parameters() const override;
  std::vector<torch::Tensor> discriminator_parameters() const override;
  void save(torch::serialize::OutputArchive& ar) const override;
  void load(torch::serialize::InputArchive& ar) override;

  /// Patch score of the domain discriminator (source or target) on images.
  torch::Tensor score(const torch::Tensor& images, Domain domain);

 private:
  LearnedTranslatorConfig config_;
  ResidualGenerator g_s2t_{nullptr}, g_t2s_{nullptr};
  PatchDiscriminator d_s_{nullptr}, d_t_{nullptr};
};

class FrozenTranslator final : public Translator {
 public:
  /// Identity translator.
  FrozenTranslator() = default;
  FrozenTranslator(std::map<std::string, Image> s2t, std::map<std::string, Image> t2s);
  /// Loads precomputed translations from two manifests (labels optional),
  /// keyed by the original sample id.
  static std::unique_ptr<FrozenTranslator> from_manifests(const std::string& s2t_manifest,
                                                          const std::string& t2s_manifest,
                                                          const AttributeSchema& schema);
  TranslatorMode mode() const override { return TranslatorMode::frozen; }
  torch::Tensor translate(const torch::Tensor& images, std::span<const std::string> ids,
                          Direction direction) override;
  bool is_identity() const { return s2t_.empty() && t2s_.empty(); }

 private:
  std::map<std::string, Image> s2t_, t2s_;
};

class AnalyticTranslator final : public Translator {
 public:
  explicit AnalyticTranslator(SynthConfig config) : config_(std::move(config)) {}
  TranslatorMode mode() const override { return TranslatorMode::analytic; }
  torch::Tensor translate(const torch::Tensor& images, std::span<const std::string> ids,
                          Direction direction) override;

 private:
  SynthConfig config_;
};

}  // namespace daan
