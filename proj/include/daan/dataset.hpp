// Two-domain attribute datasets: samples, manifests, vote aggregation.
//
// Manifest CSV:      id,path,label_<attr1>,...,label_<attrN>
// Vote file CSV:     id,annotator,label_<attr1>,...,label_<attrN>
//
// Label cells are `0`/`1`; target-domain rows may leave every label cell
// empty. Image paths are relative to the manifest's directory unless
// absolute.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "daan/schema.hpp"

namespace daan {

enum class Domain { source, target };
enum class Split { train, test };
/// Translation direction between the two domains.
enum class Direction { s2t, t2s };

std::string to_string(Domain d);

/// Dense CHW float image with values in [0,1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w), pixels(static_cast<std::size_t>(c) * h * w, fill) {}

  float& at(int c, int y, int x) {
    return pixels[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return pixels[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  bool same_shape(const Image& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  bool operator==(const Image&) const = default;
};

struct Sample {
  std::string id;
  Image image;
  std::optional<LabelVector> labels;
  Domain domain = Domain::source;
};

/// Immutable-after-build collection of samples from a single domain.
/// Source datasets require labels on every sample.
class Dataset {
 public:
  Dataset(AttributeSchema schema, Domain domain, Split split = Split::train)
      : schema_(std::move(schema)), domain_(domain), split_(split) {}

  /// Validates domain, id uniqueness, image shape and label constraints.
  void add(Sample sample);

  const AttributeSchema& schema() const { return schema_; }
  Domain domain() const { return domain_; }
  Split split() const { return split_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<Sample>& samples() const { return samples_; }
  /// True iff every sample carries labels.
  bool fully_labeled() const;
  /// Index of a sample id, or nullopt.
  std::optional<std::size_t> find(const std::string& id) const;

 private:
  AttributeSchema schema_;
  Domain domain_;
  Split split_;
  std::vector<Sample> samples_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Label-free view over a dataset. Unsupervised adaptation code receives
/// target data only through this type.
class UnlabeledView {
 public:
  explicit UnlabeledView(const Dataset& ds) : ds_(&ds) {}
  std::size_t size() const { return ds_->size(); }
  bool empty() const { return ds_->empty(); }
  const std::string& id(std::size_t i) const { return (*ds_)[i].id; }
  const Image& image(std::size_t i) const { return (*ds_)[i].image; }
  Domain domain() const { return ds_->domain(); }

 private:
  const Dataset* ds_;
};

/// Per-bit strict majority over >= 3 votes; ties resolve to 0.
LabelVector majority_vote(std::span<const LabelVector> votes);

/// Reads a manifest and its images. Source rows must carry all N labels.
Dataset load_manifest(const std::string& path, const AttributeSchema& schema, Domain domain,
                      Split split = Split::train);

/// Writes `dataset` as `manifest_path`, storing images as 16-bit PNG files
/// under `image_dir` (relative paths recorded when possible). `with_labels`
/// false leaves label cells empty.
void write_manifest(const std::string& manifest_path, const std::string& image_dir,
                    const Dataset& dataset, bool with_labels = true);

/// Manifest header line for a schema.
std::string manifest_header(const AttributeSchema& schema);

/// Aggregates a vote file by majority_vote. Returns (id, label) pairs in
/// order of first appearance. Throws FormatError listing every id with
/// fewer than three votes.
std::vector<std::pair<std::string, LabelVector>> aggregate_votes(const std::string& path,
                                                                 const AttributeSchema& schema);

}  // namespace daan
