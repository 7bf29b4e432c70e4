// Paired source/target mini-batch scheduling.
//
// An epoch has ceil(max(|S|, |T|) / batch) steps. Each domain contributes
// a fresh permutation per epoch, topped up by draws with replacement so
// every step carries exactly `batch` indices from both domains. The
// schedule of step k is a pure function of (seed, k), so a stream can be
// positioned anywhere without replaying earlier steps.

#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "daan/dataset.hpp"

namespace daan {

struct PairedIndices {
  std::vector<std::size_t> source;
  std::vector<std::size_t> target;
};

class BatchStream {
 public:
  BatchStream(std::size_t source_size, std::size_t target_size, int batch_size, std::uint64_t seed);

  std::size_t steps_per_epoch() const { return steps_per_epoch_; }
  std::int64_t position() const { return position_; }
  void seek(std::int64_t step) { position_ = step; }

  /// Indices of the batch at the current position; advances by one step.
  PairedIndices next();
  /// Indices of global step `step` without moving the stream.
  PairedIndices at(std::int64_t step) const;

 private:
  std::vector<std::size_t> epoch_order(std::size_t n, std::int64_t epoch, std::uint64_t salt) const;

  std::size_t source_size_;
  std::size_t target_size_;
  std::size_t batch_;
  std::uint64_t seed_;
  std::size_t steps_per_epoch_;
  std::int64_t position_ = 0;
};

BatchStream make_batches(const Dataset& source, const UnlabeledView& target, int batch_size,
                         std::uint64_t seed);

/// Labeled mini-batch: images [B,C,H,W], per-group class indices [B,G]
/// (int64) and binary labels [B,N] (float).
struct LabeledBatch {
  torch::Tensor images;
  torch::Tensor group_targets;
  torch::Tensor binary;
  std::vector<std::string> ids;
};

/// Unlabeled mini-batch.
struct ImageBatch {
  torch::Tensor images;
  std::vector<std::string> ids;
};

torch::Tensor images_to_tensor(std::span<const Image* const> images);
Image tensor_to_image(const torch::Tensor& chw);

LabeledBatch gather_labeled(const Dataset& ds, std::span<const std::size_t> idx);
ImageBatch gather_images(const UnlabeledView& view, std::span<const std::size_t> idx);

}  // namespace daan
