#include "daan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "daan/error.hpp"

namespace daan {

namespace {

constexpr float kNoiseAmplitude = 0.1f;
constexpr float kForegroundThreshold = 0.25f;
constexpr float kShadeLevel[2] = {0.9f, 0.55f};
constexpr double kRadiusFraction[3] = {0.14, 0.21, 0.28};
constexpr double kMaxLogAspect = 0.35;
constexpr double kMaxRotation = 0.5;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return splitmix64(seed ^ splitmix64(h));
}

/// Uniform double in [0,1) from the top 53 bits; independent of the
/// standard library's distribution implementations.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct Geometry {
  int shape, size, shade;
  double cx, cy, radius, sx, sy, theta;
};

bool inside(const Geometry& g, double px, double py) {
  const double dx = px - g.cx, dy = py - g.cy;
  const double c = std::cos(g.theta), s = std::sin(g.theta);
  const double u = (c * dx + s * dy) / (g.sx * g.radius);
  const double v = (-s * dx + c * dy) / (g.sy * g.radius);
  switch (g.shape) {
    case 0:
      return u * u + v * v <= 1.0;
    case 1:
      return std::max(std::abs(u), std::abs(v)) <= 0.85;
    default: {
      // apex (0,-1), base corners (+-1, 0.75)
      if (v > 0.75) return false;
      const double half_width = (v + 1.0) / 1.75;  // 0 at apex, 1 at base
      return v >= -1.0 && std::abs(u) <= half_width;
    }
  }
}

using Mask = std::vector<std::uint8_t>;

Mask rasterize(const Geometry& g, int size) {
  Mask m(static_cast<std::size_t>(size) * size, 0);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) m[static_cast<std::size_t>(y) * size + x] = inside(g, x + 0.5, y + 0.5);
  return m;
}

/// Mask pixels with a 4-neighbour outside the mask (or outside the image).
Mask inner_boundary(const Mask& m, int size) {
  Mask o(m.size(), 0);
  auto at = [&](int x, int y) -> bool {
    if (x < 0 || y < 0 || x >= size || y >= size) return false;
    return m[static_cast<std::size_t>(y) * size + x];
  };
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      if (at(x, y) && (!at(x - 1, y) || !at(x + 1, y) || !at(x, y - 1) || !at(x, y + 1)))
        o[static_cast<std::size_t>(y) * size + x] = 1;
  return o;
}

/// Complement of the 4-connected background region reachable from the
/// image border. An 8-connected closed outline therefore fills solid.
Mask fill_enclosed(const Mask& fg, int size) {
  Mask outside(fg.size(), 0);
  std::vector<int> stack;
  auto push = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= size || y >= size) return;
    const auto k = static_cast<std::size_t>(y) * size + x;
    if (fg[k] || outside[k]) return;
    outside[k] = 1;
    stack.push_back(static_cast<int>(k));
  };
  for (int i = 0; i < size; ++i) {
    push(i, 0);
    push(i, size - 1);
    push(0, i);
    push(size - 1, i);
  }
  while (!stack.empty()) {
    const int k = stack.back();
    stack.pop_back();
    const int x = k % size, y = k / size;
    push(x - 1, y);
    push(x + 1, y);
    push(x, y - 1);
    push(x, y + 1);
  }
  Mask filled(fg.size());
  for (std::size_t k = 0; k < fg.size(); ++k) filled[k] = outside[k] ? 0 : 1;
  return filled;
}

Image compose(const Mask& mask, float level, std::span<const float> noise, Domain style, double gap, int size,
              int channels) {
  Image img(channels, size, size);
  const float keep = static_cast<float>(1.0 - gap);
  const Mask outline = style == Domain::target ? inner_boundary(mask, size) : Mask{};
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const auto k = static_cast<std::size_t>(y) * size + x;
      float v;
      if (style == Domain::source) {
        v = (mask[k] ? level : 0.0f) + kNoiseAmplitude * noise[k];
      } else {
        const float shape = outline[k] ? level : (mask[k] ? keep * level : 0.0f);
        v = shape + keep * kNoiseAmplitude * noise[k];
      }
      v = std::clamp(v, 0.0f, 1.0f);
      for (int c = 0; c < channels; ++c) img.at(c, y, x) = v;
    }
  }
  return img;
}

std::string sample_id(Domain d, const std::string& prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05d", i);
  return std::string(d == Domain::source ? "s_" : "t_") + prefix + "_" + buf;
}

}  // namespace

std::string to_string(Factor f) {
  switch (f) {
    case Factor::shape:
      return "shape";
    case Factor::size:
      return "size";
    case Factor::shade:
      return "shade";
  }
  return "?";
}

int factor_classes(Factor f) { return f == Factor::shade ? 2 : 3; }

GroupSpec GroupSpec::standard() {
  return GroupSpec{{{Factor::shape, "shape"}, {Factor::size, "size"}, {Factor::shade, "bright"}}};
}

void SynthConfig::validate() const {
  if (image_size < 16) throw Error("synth image_size must be >= 16");
  if (n_per_domain < 1) throw Error("synth n_per_domain must be >= 1");
  if (!(style_gap >= 0.0 && style_gap <= 1.0)) throw Error("synth style_gap must lie in [0,1]");
  if (channels != 1 && channels != 3) throw Error("synth channels must be 1 or 3");
}

AttributeSchema synth_schema() {
  return AttributeSchema::parse(
      "shape: circle, square, triangle\n"
      "size: small, medium, large\n"
      "bright: bright\n");
}

std::vector<float> texture_noise(const SynthConfig& config, const std::string& id) {
  std::mt19937_64 rng(mix(config.seed, "noise:" + id));
  std::vector<float> n(static_cast<std::size_t>(config.image_size) * config.image_size);
  for (auto& v : n) v = static_cast<float>(unit(rng));
  return n;
}

SynthDomains synth_generate(const SynthConfig& config) { return synth_generate(config, synth_schema()); }

SynthDomains synth_generate(const SynthConfig& config, const AttributeSchema& schema) {
  config.validate();

  // Resolve which schema group each factor drives.
  std::vector<int> factor_group(3, -1);
  std::vector<bool> bound(schema.num_groups(), false);
  for (const auto& [factor, name] : config.group_spec.bindings) {
    const int g = schema.group_index(name);
    if (g < 0) throw Error("group spec binds " + to_string(factor) + " to unknown group '" + name + "'");
    if (schema.groups()[static_cast<std::size_t>(g)].num_classes() != factor_classes(factor))
      throw Error("group '" + name + "' has " +
                  std::to_string(schema.groups()[static_cast<std::size_t>(g)].num_classes()) +
                  " classes but factor " + to_string(factor) + " renders " +
                  std::to_string(factor_classes(factor)));
    if (factor_group[static_cast<int>(factor)] >= 0 || bound[static_cast<std::size_t>(g)])
      throw Error("group spec binds factor or group '" + name + "' twice");
    factor_group[static_cast<int>(factor)] = g;
    bound[static_cast<std::size_t>(g)] = true;
  }
  for (std::size_t g = 0; g < bound.size(); ++g)
    if (!bound[g]) throw Error("schema group '" + schema.groups()[g].name + "' has no rendered factor");

  SynthDomains out{Dataset(schema, Domain::source, config.split), Dataset(schema, Domain::target, config.split),
                   {}, {}};
  const int size = config.image_size;

  for (Domain domain : {Domain::source, Domain::target}) {
    std::mt19937_64 rng(mix(config.seed, "geometry:" + to_string(domain) + ":" + config.id_prefix));
    Dataset& ds = domain == Domain::source ? out.source : out.target;
    auto& renders = domain == Domain::source ? out.source_render : out.target_render;
    const double gap = domain == Domain::target ? config.style_gap : 0.0;
    for (int i = 0; i < config.n_per_domain; ++i) {
      Geometry g{};
      g.shape = static_cast<int>(rng() % 3);
      g.size = static_cast<int>(rng() % 3);
      g.shade = static_cast<int>(rng() % 2);
      g.radius = kRadiusFraction[g.size] * size;
      const double log_aspect = gap * kMaxLogAspect * (2.0 * unit(rng) - 1.0);
      g.sx = std::exp(0.5 * log_aspect);
      g.sy = std::exp(-0.5 * log_aspect);
      g.theta = gap * kMaxRotation * (2.0 * unit(rng) - 1.0);
      const double extent = 1.25 * g.radius * std::max(g.sx, g.sy);
      const double lo = extent + 1.0, hi = size - extent - 1.0;
      g.cx = lo + (hi - lo) * unit(rng);
      g.cy = lo + (hi - lo) * unit(rng);

      const Mask mask = rasterize(g, size);
      Sample s;
      s.id = sample_id(domain, config.id_prefix, i);
      s.domain = domain;
      const auto noise = texture_noise(config, s.id);
      s.image = compose(mask, kShadeLevel[g.shade], noise, domain, gap, size, config.channels);

      std::vector<int> cls(schema.num_groups(), 0);
      cls[static_cast<std::size_t>(factor_group[0])] = g.shape;
      cls[static_cast<std::size_t>(factor_group[1])] = g.size;
      cls[static_cast<std::size_t>(factor_group[2])] = g.shade;
      s.labels = schema.binary_from_group_argmax(cls);

      ShapeRender r{g.shape, g.size, g.shade, g.cx, g.cy, size, size, -1, -1};
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
          if (mask[static_cast<std::size_t>(y) * size + x]) {
            r.x0 = std::min(r.x0, x);
            r.y0 = std::min(r.y0, y);
            r.x1 = std::max(r.x1, x);
            r.y1 = std::max(r.y1, y);
          }
      renders.push_back(r);
      ds.add(std::move(s));
    }
  }
  return out;
}

Image analytic_translate(const Image& image, Direction direction, const SynthConfig& config,
                         const std::string& id) {
  const int size = config.image_size;
  if (image.height != size || image.width != size)
    throw ShapeError("analytic_translate: image is " + std::to_string(image.height) + "x" +
                     std::to_string(image.width) + ", config renders " + std::to_string(size));
  const auto noise = texture_noise(config, id);
  const double gap = config.style_gap;
  const float keep = static_cast<float>(1.0 - gap);
  const std::size_t n = noise.size();

  // Strip the known noise, then recover the shape mask and its level.
  const float in_noise = direction == Direction::s2t ? kNoiseAmplitude : keep * kNoiseAmplitude;
  std::vector<float> clean(n);
  Mask fg(n, 0);
  float level = 0.0f;
  for (std::size_t k = 0; k < n; ++k) {
    clean[k] = image.pixels[k] - in_noise * noise[k];
    fg[k] = clean[k] > kForegroundThreshold;
    if (fg[k]) level = std::max(level, clean[k]);
  }
  const Mask mask = direction == Direction::s2t ? fg : fill_enclosed(fg, size);
  return compose(mask, level, noise, direction == Direction::s2t ? Domain::target : Domain::source, gap, size,
                 image.channels);
}

}  // namespace daan
