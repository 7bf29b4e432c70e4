// Trainable networks: shared feature extractor, grouped classifier heads
// and the four domain discriminators (two on feature maps, two on
// attention stacks).

#pragma once

#include <array>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "daan/schema.hpp"

namespace daan {

enum class BackboneKind { small_cnn, resnet50 };
enum class DiscriminatorId { Fs, Ft, As, At };

std::string to_string(BackboneKind k);
BackboneKind backbone_from_string(const std::string& s);
std::string to_string(DiscriminatorId d);

struct ModelConfig {
  BackboneKind backbone = BackboneKind::small_cnn;
  int in_channels = 1;
  /// Expected input height/width; 0 accepts any size.
  int image_size = 32;
  /// small_cnn: one 3x3 conv + ReLU block per entry.
  std::vector<int> cnn_widths = {16, 32, 32, 32};
  /// small_cnn: number of leading blocks followed by 2x2 max pooling.
  int cnn_pooled_blocks = 2;
  /// Hidden widths of the 5-conv discriminators; the output layer has width 1.
  std::vector<int> disc_widths = {64, 128, 256, 512};
  double leaky_slope = 0.2;
  /// Grouped softmax heads (true) or one flat sigmoid head over all attributes.
  bool multitask = true;
};

/// Pre-pooling feature map F' [B,C,H,W] and its global average F [B,C].
struct FeatureBundle {
  torch::Tensor spatial;
  torch::Tensor pooled;

  FeatureBundle detach() const { return {spatial.detach(), pooled.detach()}; }
};

/// Output of the classifier heads for a batch. In grouped mode one logits
/// tensor [B,k_g] per group; in flat mode a single [B,N] tensor.
struct GroupLogits {
  std::vector<torch::Tensor> logits;
  bool multitask = true;

  /// Concatenated per-group softmax (grouped) or per-attribute sigmoid (flat).
  torch::Tensor probabilities() const;
  /// Per-group argmax [B,G] (grouped mode only).
  torch::Tensor group_argmax() const;
};

class ExtractorImpl : public torch::nn::Module {
 public:
  explicit ExtractorImpl(const ModelConfig& config);
  FeatureBundle forward(const torch::Tensor& images);
  int out_channels() const { return out_channels_; }

 private:
  ModelConfig config_;
  torch::nn::Sequential body_{nullptr};
  int out_channels_ = 0;
};
TORCH_MODULE(Extractor);

class GroupHeadsImpl : public torch::nn::Module {
 public:
  GroupHeadsImpl(const AttributeSchema& schema, int in_features, bool multitask);
  GroupLogits forward(const torch::Tensor& pooled);

  bool multitask() const { return multitask_; }
  std::size_t num_heads() const { return heads_.size(); }
  torch::nn::Linear head(std::size_t i) const { return heads_.at(i); }
  /// Rows of every head stacked in schema order: [C_a, C_f].
  torch::Tensor weight_matrix() const;
  /// [C_a]
  torch::Tensor bias_vector() const;
  /// (group, class) name of every row of weight_matrix().
  const std::vector<std::pair<std::string, std::string>>& class_index() const { return class_index_; }
  int in_features() const { return in_features_; }

 private:
  bool multitask_;
  int in_features_;
  std::vector<torch::nn::Linear> heads_;
  std::vector<std::pair<std::string, std::string>> class_index_;
};
TORCH_MODULE(GroupHeads);

/// Five 3x3/stride-1/pad-1 convolutions with leaky ReLU between and a
/// sigmoid output clamped to [1e-7, 1 - 1e-7]. Spatial size is preserved.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  DiscriminatorImpl(int in_channels, const std::vector<int>& hidden_widths, double leaky_slope);
  torch::Tensor forward(const torch::Tensor& input);
  int in_channels() const { return in_channels_; }

 private:
  int in_channels_;
  torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(Discriminator);

/// Extractor, heads and the four discriminators under one module tree.
class DaanNetImpl : public torch::nn::Module {
 public:
  DaanNetImpl(const ModelConfig& config, const AttributeSchema& schema);

  FeatureBundle extract_features(const torch::Tensor& images);
  GroupLogits classify(const torch::Tensor& pooled);
  torch::Tensor discriminate(const torch::Tensor& input, DiscriminatorId which);

  Extractor extractor{nullptr};
  GroupHeads heads{nullptr};
  Discriminator& discriminator(DiscriminatorId which) { return discs_[static_cast<std::size_t>(which)]; }

  /// Extractor + heads.
  std::vector<torch::Tensor> main_parameters() const;
  /// All four discriminators.
  std::vector<torch::Tensor> discriminator_parameters() const;
  std::vector<torch::Tensor> discriminator_parameters(DiscriminatorId which) const;

  const ModelConfig& config() const { return config_; }
  int attention_channels() const;

 private:
  ModelConfig config_;
  std::array<Discriminator, 4> discs_{nullptr, nullptr, nullptr, nullptr};
};
TORCH_MODULE(DaanNet);

}  // namespace daan
