#include "daan/translator.hpp"

#include "daan/batches.hpp"
#include "daan/error.hpp"
#include "daan/losses.hpp"

namespace daan {

namespace nn = torch::nn;

std::string to_string(TranslatorMode m) {
  switch (m) {
    case TranslatorMode::learned:
      return "learned";
    case TranslatorMode::frozen:
      return "frozen";
    case TranslatorMode::analytic:
      return "analytic";
  }
  return "?";
}

TranslatorMode translator_mode_from_string(const std::string& s) {
  if (s == "learned") return TranslatorMode::learned;
  if (s == "frozen") return TranslatorMode::frozen;
  if (s == "analytic") return TranslatorMode::analytic;
  throw Error("unknown translator mode '" + s + "' (expected learned, frozen or analytic)");
}

torch::Tensor Translator::generator_loss(const torch::Tensor& x_s, const torch::Tensor&, const torch::Tensor&,
                                         const torch::Tensor&, TranslatorLosses* parts) {
  auto zero = torch::zeros({}, x_s.options());
  if (parts) {
    parts->adversarial = parts->cycle = parts->identity = zero;
    parts->active = false;
  }
  return zero;
}

torch::Tensor Translator::discriminator_loss(const torch::Tensor& x_s, const torch::Tensor&, const torch::Tensor&,
                                             const torch::Tensor&) {
  return torch::zeros({}, x_s.options());
}

TranslatorLosses Translator::losses(const torch::Tensor& x_s, std::span<const std::string> ids_s,
                                    const torch::Tensor& x_t, std::span<const std::string> ids_t) {
  TranslatorLosses out;
  const auto s2t = translate(x_s, ids_s, Direction::s2t);
  const auto t2s = translate(x_t, ids_t, Direction::t2s);
  out.generator = generator_loss(x_s, x_t, s2t, t2s, &out);
  out.discriminator = discriminator_loss(x_s, x_t, s2t, t2s);
  out.active = mode() == TranslatorMode::learned;
  return out;
}

ResidualGeneratorImpl::ResidualGeneratorImpl(int channels, int width, int blocks) {
  in_ = register_module("input_conv", nn::Conv2d(nn::Conv2dOptions(channels, width, 3).padding(1)));
  for (int b = 0; b < blocks; ++b) {
    blocks_.push_back(register_module(
        "res" + std::to_string(b),
        nn::Sequential(nn::Conv2d(nn::Conv2dOptions(width, width, 3).padding(1)), nn::ReLU(),
                       nn::Conv2d(nn::Conv2dOptions(width, width, 3).padding(1)))));
  }
  out_ = register_module("output_conv", nn::Conv2d(nn::Conv2dOptions(width, channels, 3).padding(1)));
}

torch::Tensor ResidualGeneratorImpl::forward(const torch::Tensor& x) {
  auto h = torch::relu(in_(x));
  for (auto& b : blocks_) h = torch::relu(h + b->forward(h));
  // Residual image update keeps the untrained generator close to identity.
  return (x + torch::tanh(out_(h))).clamp(0.0, 1.0);
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(int channels, int width) {
  auto lrelu = [] { return nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)); };
  body_ = register_module(
      "body", nn::Sequential(nn::Conv2d(nn::Conv2dOptions(channels, width, 4).stride(2).padding(1)), lrelu(),
                             nn::Conv2d(nn::Conv2dOptions(width, 2 * width, 4).stride(2).padding(1)), lrelu(),
                             nn::Conv2d(nn::Conv2dOptions(2 * width, 1, 3).padding(1))));
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& x) {
  return torch::sigmoid(body_->forward(x)).clamp(kScoreEps, 1.0 - kScoreEps);
}

LearnedTranslator::LearnedTranslator(const LearnedTranslatorConfig& config) : config_(config) {
  g_s2t_ = ResidualGenerator(config.channels, config.width, config.residual_blocks);
  g_t2s_ = ResidualGenerator(config.channels, config.width, config.residual_blocks);
  d_s_ = PatchDiscriminator(config.channels, config.width);
  d_t_ = PatchDiscriminator(config.channels, config.width);
}

torch::Tensor LearnedTranslator::translate(const torch::Tensor& images, std::span<const std::string>,
                                           Direction direction) {
  return direction == Direction::s2t ? g_s2t_->forward(images) : g_t2s_->forward(images);
}

torch::Tensor LearnedTranslator::score(const torch::Tensor& images, Domain domain) {
  return domain == Domain::source ? d_s_->forward(images) : d_t_->forward(images);
}

torch::Tensor LearnedTranslator::generator_loss(const torch::Tensor& x_s, const torch::Tensor& x_t,
                                                const torch::Tensor& x_s2t, const torch::Tensor& x_t2s,
                                                TranslatorLosses* parts) {
  const auto adv = consistency_adversarial(d_t_->forward(x_s2t)) + consistency_adversarial(d_s_->forward(x_t2s));
  const auto cycle =
      (g_t2s_->forward(x_s2t) - x_s).abs().mean() + (g_s2t_->forward(x_t2s) - x_t).abs().mean();
  const auto ident = (g_s2t_->forward(x_t) - x_t).abs().mean() + (g_t2s_->forward(x_s) - x_s).abs().mean();
  if (parts) {
    parts->adversarial = adv;
    parts->cycle = cycle;
    parts->identity = ident;
    parts->active = true;
  }
  return adv + config_.cycle_weight * cycle + config_.identity_weight * ident;
}

torch::Tensor LearnedTranslator::discriminator_loss(const torch::Tensor& x_s, const torch::Tensor& x_t,
                                                    const torch::Tensor& x_s2t, const torch::Tensor& x_t2s) {
  return discriminator_adversarial(d_t_->forward(x_t), d_t_->forward(x_s2t.detach())) +
         discriminator_adversarial(d_s_->forward(x_s), d_s_->forward(x_t2s.detach()));
}

std::vector<torch::Tensor> LearnedTranslator::generator_parameters() const {
  auto p = g_s2t_->parameters();
  auto q = g_t2s_->parameters();
  p.insert(p.end(), q.begin(), q.end());
  return p;
}

std::vector<torch::Tensor> LearnedTranslator::discriminator_parameters() const {
  auto p = d_s_->parameters();
  auto q = d_t_->parameters();
  p.insert(p.end(), q.begin(), q.end());
  return p;
}

void LearnedTranslator::save(torch::serialize::OutputArchive& ar) const {
  const std::pair<const char*, const nn::Module*> mods[] = {
      {"g_s2t", g_s2t_.get()}, {"g_t2s", g_t2s_.get()}, {"d_s", d_s_.get()}, {"d_t", d_t_.get()}};
  for (const auto& [name, m] : mods) {
    torch::serialize::OutputArchive sub;
    m->save(sub);
    ar.write(name, sub);
  }
}

void LearnedTranslator::load(torch::serialize::InputArchive& ar) {
  const std::pair<const char*, nn::Module*> mods[] = {
      {"g_s2t", g_s2t_.get()}, {"g_t2s", g_t2s_.get()}, {"d_s", d_s_.get()}, {"d_t", d_t_.get()}};
  for (const auto& [name, m] : mods) {
    torch::serialize::InputArchive sub;
    ar.read(name, sub);
    m->load(sub);
  }
}

FrozenTranslator::FrozenTranslator(std::map<std::string, Image> s2t, std::map<std::string, Image> t2s)
    : s2t_(std::move(s2t)), t2s_(std::move(t2s)) {}

std::unique_ptr<FrozenTranslator> FrozenTranslator::from_manifests(const std::string& s2t_manifest,
                                                                   const std::string& t2s_manifest,
                                                                   const AttributeSchema& schema) {
  auto read = [&](const std::string& path) {
    std::map<std::string, Image> table;
    const Dataset ds = load_manifest(path, schema, Domain::target);
    for (const auto& s : ds.samples()) table.emplace(s.id, s.image);
    return table;
  };
  return std::make_unique<FrozenTranslator>(read(s2t_manifest), read(t2s_manifest));
}

torch::Tensor FrozenTranslator::translate(const torch::Tensor& images, std::span<const std::string> ids,
                                          Direction direction) {
  if (is_identity()) return images.detach().clone();
  const auto& table = direction == Direction::s2t ? s2t_ : t2s_;
  if (static_cast<std::int64_t>(ids.size()) != images.size(0))
    throw ShapeError("frozen translator needs one id per image");
  std::vector<const Image*> out;
  for (const auto& id : ids) {
    auto it = table.find(id);
    if (it == table.end()) throw Error("no precomputed translation for sample '" + id + "'");
    out.push_back(&it->second);
  }
  auto t = images_to_tensor(out).to(images.dtype());
  if (t.sizes() != images.sizes()) throw ShapeError("precomputed translation shape differs from input");
  return t.clamp(0.0, 1.0);
}

torch::Tensor AnalyticTranslator::translate(const torch::Tensor& images, std::span<const std::string> ids,
                                            Direction direction) {
  if (images.dim() != 4 || static_cast<std::int64_t>(ids.size()) != images.size(0))
    throw ShapeError("analytic translator needs [B,C,H,W] images with one id each");
  const auto src = images.detach().to(torch::kFloat32).contiguous();
  std::vector<Image> out;
  out.reserve(ids.size());
  for (std::int64_t b = 0; b < src.size(0); ++b)
    out.push_back(analytic_translate(tensor_to_image(src[b]), direction, config_, ids[static_cast<std::size_t>(b)]));
  std::vector<const Image*> ptrs;
  for (const auto& i : out) ptrs.push_back(&i);
  return images_to_tensor(ptrs).to(images.dtype());
}

}  // namespace daan
