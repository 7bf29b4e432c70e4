// Procedural two-domain shapes dataset with a known style mapping.
//
// Every image shows one convex shape whose kind, size class and shade are
// the semantic factors, each bound to one schema group. The source style
// is a filled shape over additive texture noise; the target style is an
// outline with a faded interior, faded noise and aspect/rotation jitter,
// all scaled by `style_gap`. At style_gap = 0 both domains come from the
// same renderer distribution.
//
// The texture noise of a sample is a pure function of (seed, sample id),
// which is what lets analytic_translate undo and redo it exactly.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "daan/dataset.hpp"
#include "daan/schema.hpp"

namespace daan {

enum class Factor { shape, size, shade };

std::string to_string(Factor f);
/// Number of classes a factor renders: shape 3, size 3, shade 2.
int factor_classes(Factor f);

/// Binding of rendered factors to schema group names. Factor class c maps
/// to the group's head class c (for shade: 0 = bright, 1 = dim).
struct GroupSpec {
  std::vector<std::pair<Factor, std::string>> bindings;

  /// shape -> "shape", size -> "size", shade -> "bright".
  static GroupSpec standard();
};

struct SynthConfig {
  int image_size = 32;
  int channels = 1;
  int n_per_domain = 2000;
  double style_gap = 0.7;
  std::uint64_t seed = 1;
  /// Split tag embedded in sample ids, e.g. "train" -> "s_train_00012".
  std::string id_prefix = "train";
  Split split = Split::train;
  GroupSpec group_spec = GroupSpec::standard();

  void validate() const;
};

/// The schema the standard group spec renders.
AttributeSchema synth_schema();

/// Ground truth geometry of one rendered image.
struct ShapeRender {
  int shape = 0;  // 0 circle, 1 square, 2 triangle
  int size = 0;   // 0 small, 1 medium, 2 large
  int shade = 0;  // 0 bright, 1 dim
  double cx = 0, cy = 0;
  // inclusive pixel bounding box of the filled shape mask
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

struct SynthDomains {
  Dataset source;
  Dataset target;  // carries oracle labels; adaptation code only sees UnlabeledView
  std::vector<ShapeRender> source_render;
  std::vector<ShapeRender> target_render;
};

/// Deterministic in `config`. Throws Error when the group spec does not
/// match `schema` (missing group, class-count mismatch, unbound group).
SynthDomains synth_generate(const SynthConfig& config, const AttributeSchema& schema);
SynthDomains synth_generate(const SynthConfig& config);

/// Per-sample texture noise in [0, 1), one value per pixel (H*W).
std::vector<float> texture_noise(const SynthConfig& config, const std::string& id);

/// Exact style mapping between the two renderer styles for an image of
/// sample `id` rendered under `config`. Semantic factors are untouched.
Image analytic_translate(const Image& image, Direction direction, const SynthConfig& config,
                         const std::string& id);

}  // namespace daan
