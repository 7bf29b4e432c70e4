#include "daan/attention.hpp"

#include <algorithm>
#include <cmath>

#include "daan/error.hpp"

namespace daan {

torch::Tensor compute_cam(const torch::Tensor& spatial, const torch::Tensor& w_row) {
  if (spatial.dim() != 3) throw ShapeError("compute_cam expects a [C,H,W] feature map");
  if (w_row.dim() != 1 || w_row.size(0) != spatial.size(0))
    throw ShapeError("compute_cam: weight length " + std::to_string(w_row.numel()) + " != channels " +
                     std::to_string(spatial.size(0)));
  return torch::tensordot(w_row, spatial, {0}, {0});
}

torch::Tensor normalize_channels(const torch::Tensor& raw) {
  const auto lo = raw.amin({2, 3}, /*keepdim=*/true);
  const auto hi = raw.amax({2, 3}, /*keepdim=*/true);
  const auto range = hi - lo;
  const auto flat = range <= 1e-12;
  // Constant planes divide by 1 and are then zeroed.
  const auto scaled = (raw - lo) / torch::where(flat, torch::ones_like(range), range);
  return torch::where(flat, torch::zeros_like(scaled), scaled);
}

AttentionStack cam_stack(const FeatureBundle& bundle, const GroupHeadsImpl& heads) {
  const auto& f = bundle.spatial;
  if (f.dim() != 4 || f.size(1) != heads.in_features())
    throw ShapeError("cam_stack: feature channels do not match head width " + std::to_string(heads.in_features()));
  AttentionStack s;
  s.raw = torch::einsum("kc,bchw->bkhw", {heads.weight_matrix(), f});
  s.maps = normalize_channels(s.raw);
  s.class_index = heads.class_index();
  return s;
}

std::array<float, 3> jet_color(float v) {
  v = std::clamp(v, 0.0f, 1.0f);
  auto ch = [&](float off) { return std::clamp(1.5f - std::abs(4.0f * v - off), 0.0f, 1.0f); };
  return {ch(3.0f), ch(2.0f), ch(1.0f)};
}

Image render_cam(const torch::Tensor& map, const Image& source) {
  if (map.dim() != 2) throw ShapeError("render_cam expects a [h,w] map");
  auto up = torch::nn::functional::interpolate(
                map.detach().to(torch::kFloat32).unsqueeze(0).unsqueeze(0),
                torch::nn::functional::InterpolateFuncOptions()
                    .size(std::vector<std::int64_t>{source.height, source.width})
                    .mode(torch::kBilinear)
                    .align_corners(false))
                .squeeze(0)
                .squeeze(0)
                .clamp(0.0, 1.0)
                .contiguous();
  const float* m = up.data_ptr<float>();
  Image out(3, source.height, source.width);
  for (int y = 0; y < source.height; ++y) {
    for (int x = 0; x < source.width; ++x) {
      const auto color = jet_color(m[static_cast<std::size_t>(y) * source.width + x]);
      for (int c = 0; c < 3; ++c) {
        const float base = source.at(source.channels == 3 ? c : 0, y, x);
        out.at(c, y, x) = 0.5f * base + 0.5f * color[static_cast<std::size_t>(c)];
      }
    }
  }
  return out;
}

std::string cam_file_name(const std::string& sample_id, const std::string& group, const std::string& cls) {
  return sample_id + "_" + group + "_" + cls + ".png";
}

}  // namespace daan
