// Class activation maps over the pre-pooling feature map: the map of class
// i is the head-weight-weighted sum of feature channels, A^i = sum_j w_ij F'_j.

#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "daan/dataset.hpp"
#include "daan/model.hpp"

namespace daan {

/// CAM of one class for one sample: spatial [C,H,W], w_row [C] -> [H,W].
torch::Tensor compute_cam(const torch::Tensor& spatial, const torch::Tensor& w_row);

/// Per-class attention maps for a batch.
struct AttentionStack {
  torch::Tensor raw;   // [B, C_a, H, W] un-normalized CAMs
  torch::Tensor maps;  // [B, C_a, H, W] per-sample per-channel min-max to [0,1]
  std::vector<std::pair<std::string, std::string>> class_index;  // (group, class) per channel
};

/// One channel per class of every head, in schema order. Constant channels
/// normalize to zeros. Differentiable in both the features and the weights.
AttentionStack cam_stack(const FeatureBundle& bundle, const GroupHeadsImpl& heads);

/// Min-max normalizes each [H,W] plane of a [B,C,H,W] tensor.
torch::Tensor normalize_channels(const torch::Tensor& raw);

/// Jet colormap, v in [0,1].
std::array<float, 3> jet_color(float v);

/// Bilinear upsample of a [0,1] map [h,w] to the image size, jet-colored and
/// blended at 0.5 over the image. Returns a 3-channel image.
Image render_cam(const torch::Tensor& map, const Image& source);

/// `<sampleId>_<group>_<class>.png`
std::string cam_file_name(const std::string& sample_id, const std::string& group, const std::string& cls);

}  // namespace daan
