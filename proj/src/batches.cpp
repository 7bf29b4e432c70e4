#include "daan/batches.hpp"

#include <algorithm>
#include <cstring>
#include <random>

#include "daan/error.hpp"

namespace daan {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Fisher-Yates with raw 64-bit draws, stable across standard libraries.
void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

BatchStream::BatchStream(std::size_t source_size, std::size_t target_size, int batch_size, std::uint64_t seed)
    : source_size_(source_size), target_size_(target_size), seed_(seed) {
  if (batch_size < 1) throw Error("batch_size must be >= 1");
  if (source_size == 0 || target_size == 0) throw Error("both domains need at least one sample");
  batch_ = static_cast<std::size_t>(batch_size);
  const std::size_t longest = std::max(source_size, target_size);
  steps_per_epoch_ = (longest + batch_ - 1) / batch_;
}

std::vector<std::size_t> BatchStream::epoch_order(std::size_t n, std::int64_t epoch, std::uint64_t salt) const {
  std::mt19937_64 rng(splitmix64(seed_ ^ splitmix64(static_cast<std::uint64_t>(epoch) * 2 + salt)));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  shuffle(order, rng);
  const std::size_t want = steps_per_epoch_ * batch_;
  while (order.size() < want) order.push_back(static_cast<std::size_t>(rng() % n));
  return order;
}

PairedIndices BatchStream::at(std::int64_t step) const {
  if (step < 0) throw Error("negative batch step");
  const auto spe = static_cast<std::int64_t>(steps_per_epoch_);
  const std::int64_t epoch = step / spe;
  const auto within = static_cast<std::size_t>(step % spe);
  const auto s = epoch_order(source_size_, epoch, 0);
  const auto t = epoch_order(target_size_, epoch, 1);
  PairedIndices out;
  const auto begin = static_cast<std::ptrdiff_t>(within * batch_);
  const auto end = begin + static_cast<std::ptrdiff_t>(batch_);
  out.source.assign(s.begin() + begin, s.begin() + end);
  out.target.assign(t.begin() + begin, t.begin() + end);
  return out;
}

PairedIndices BatchStream::next() { return at(position_++); }

BatchStream make_batches(const Dataset& source, const UnlabeledView& target, int batch_size, std::uint64_t seed) {
  return BatchStream(source.size(), target.size(), batch_size, seed);
}

torch::Tensor images_to_tensor(std::span<const Image* const> images) {
  if (images.empty()) throw ShapeError("empty image batch");
  const Image& first = *images.front();
  auto t = torch::empty({static_cast<std::int64_t>(images.size()), first.channels, first.height, first.width},
                        torch::kFloat32);
  float* dst = t.data_ptr<float>();
  for (const Image* img : images) {
    if (!img->same_shape(first)) throw ShapeError("images in a batch differ in shape");
    std::memcpy(dst, img->pixels.data(), img->pixels.size() * sizeof(float));
    dst += img->pixels.size();
  }
  return t;
}

Image tensor_to_image(const torch::Tensor& chw) {
  if (chw.dim() != 3) throw ShapeError("expected a [C,H,W] tensor");
  auto t = chw.detach().to(torch::kFloat32).contiguous();
  Image img(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), static_cast<int>(t.size(2)));
  std::memcpy(img.pixels.data(), t.data_ptr<float>(), img.pixels.size() * sizeof(float));
  return img;
}

LabeledBatch gather_labeled(const Dataset& ds, std::span<const std::size_t> idx) {
  std::vector<const Image*> imgs;
  const auto& schema = ds.schema();
  const auto g = static_cast<std::int64_t>(schema.num_groups());
  const auto n = static_cast<std::int64_t>(schema.num_attributes());
  auto targets = torch::empty({static_cast<std::int64_t>(idx.size()), g}, torch::kInt64);
  auto binary = torch::empty({static_cast<std::int64_t>(idx.size()), n}, torch::kFloat32);
  LabeledBatch b;
  auto* tp = targets.data_ptr<std::int64_t>();
  auto* bp = binary.data_ptr<float>();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const Sample& s = ds[idx[i]];
    if (!s.labels) throw Error("sample '" + s.id + "' has no labels");
    imgs.push_back(&s.image);
    const auto cls = schema.group_targets(*s.labels);
    for (std::int64_t k = 0; k < g; ++k) tp[static_cast<std::int64_t>(i) * g + k] = cls[static_cast<std::size_t>(k)];
    for (std::int64_t k = 0; k < n; ++k) bp[static_cast<std::int64_t>(i) * n + k] = (*s.labels)[static_cast<std::size_t>(k)];
    b.ids.push_back(s.id);
  }
  b.images = images_to_tensor(imgs);
  b.group_targets = targets;
  b.binary = binary;
  return b;
}

ImageBatch gather_images(const UnlabeledView& view, std::span<const std::size_t> idx) {
  std::vector<const Image*> imgs;
  ImageBatch b;
  for (auto i : idx) {
    imgs.push_back(&view.image(i));
    b.ids.push_back(view.id(i));
  }
  b.images = images_to_tensor(imgs);
  return b;
}

}  // namespace daan
