#include "daan/model.hpp"

#include "daan/error.hpp"

namespace daan {

namespace nn = torch::nn;

std::string to_string(BackboneKind k) { return k == BackboneKind::resnet50 ? "resnet50" : "small_cnn"; }

BackboneKind backbone_from_string(const std::string& s) {
  if (s == "small_cnn") return BackboneKind::small_cnn;
  if (s == "resnet50") return BackboneKind::resnet50;
  throw Error("unknown backbone '" + s + "' (expected small_cnn or resnet50)");
}

std::string to_string(DiscriminatorId d) {
  switch (d) {
    case DiscriminatorId::Fs:
      return "Fs";
    case DiscriminatorId::Ft:
      return "Ft";
    case DiscriminatorId::As:
      return "As";
    case DiscriminatorId::At:
      return "At";
  }
  return "?";
}

torch::Tensor GroupLogits::probabilities() const {
  if (!multitask) return torch::sigmoid(logits.front());
  std::vector<torch::Tensor> parts;
  parts.reserve(logits.size());
  for (const auto& l : logits) parts.push_back(torch::softmax(l, 1));
  return torch::cat(parts, 1);
}

torch::Tensor GroupLogits::group_argmax() const {
  if (!multitask) throw Error("group_argmax needs grouped heads");
  std::vector<torch::Tensor> parts;
  for (const auto& l : logits) parts.push_back(l.argmax(1, /*keepdim=*/true));
  return torch::cat(parts, 1);
}

namespace {

nn::Conv2dOptions conv3(int in, int out) { return nn::Conv2dOptions(in, out, 3).stride(1).padding(1); }

// ResNet-50 bottleneck: 1x1 reduce, 3x3, 1x1 expand (x4), projection shortcut
// when the shape changes.
class BottleneckImpl : public nn::Module {
 public:
  BottleneckImpl(int in, int width, int stride) {
    const int out = width * 4;
    conv1_ = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(in, width, 1).bias(false)));
    bn1_ = register_module("bn1", nn::BatchNorm2d(width));
    conv2_ = register_module(
        "conv2", nn::Conv2d(nn::Conv2dOptions(width, width, 3).stride(stride).padding(1).bias(false)));
    bn2_ = register_module("bn2", nn::BatchNorm2d(width));
    conv3_ = register_module("conv3", nn::Conv2d(nn::Conv2dOptions(width, out, 1).bias(false)));
    bn3_ = register_module("bn3", nn::BatchNorm2d(out));
    if (stride != 1 || in != out) {
      down_ = register_module("downsample",
                              nn::Sequential(nn::Conv2d(nn::Conv2dOptions(in, out, 1).stride(stride).bias(false)),
                                             nn::BatchNorm2d(out)));
    }
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto y = torch::relu(bn1_(conv1_(x)));
    y = torch::relu(bn2_(conv2_(y)));
    y = bn3_(conv3_(y));
    return torch::relu(y + (down_ ? down_->forward(x) : x));
  }

 private:
  nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, conv3_{nullptr};
  nn::BatchNorm2d bn1_{nullptr}, bn2_{nullptr}, bn3_{nullptr};
  nn::Sequential down_{nullptr};
};
TORCH_MODULE(Bottleneck);

nn::Sequential make_resnet50(int in_channels) {
  nn::Sequential body;
  body->push_back(nn::Conv2d(nn::Conv2dOptions(in_channels, 64, 7).stride(2).padding(3).bias(false)));
  body->push_back(nn::BatchNorm2d(64));
  body->push_back(nn::ReLU());
  body->push_back(nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2).padding(1)));
  const int blocks[4] = {3, 4, 6, 3};
  const int widths[4] = {64, 128, 256, 512};
  int in = 64;
  for (int stage = 0; stage < 4; ++stage) {
    for (int b = 0; b < blocks[stage]; ++b) {
      const int stride = (b == 0 && stage > 0) ? 2 : 1;
      body->push_back(Bottleneck(in, widths[stage], stride));
      in = widths[stage] * 4;
    }
  }
  return body;
}

}  // namespace

ExtractorImpl::ExtractorImpl(const ModelConfig& config) : config_(config) {
  if (config.backbone == BackboneKind::resnet50) {
    body_ = make_resnet50(config.in_channels);
    out_channels_ = 2048;
  } else {
    if (config.cnn_widths.empty()) throw Error("small_cnn needs at least one conv block");
    body_ = nn::Sequential();
    int in = config.in_channels;
    for (std::size_t i = 0; i < config.cnn_widths.size(); ++i) {
      body_->push_back(nn::Conv2d(conv3(in, config.cnn_widths[i])));
      body_->push_back(nn::ReLU());
      if (static_cast<int>(i) < config.cnn_pooled_blocks) body_->push_back(nn::MaxPool2d(2));
      in = config.cnn_widths[i];
    }
    out_channels_ = in;
  }
  register_module("body", body_);
}

FeatureBundle ExtractorImpl::forward(const torch::Tensor& images) {
  if (images.dim() != 4 || images.size(1) != config_.in_channels)
    throw ShapeError("extractor expects [B," + std::to_string(config_.in_channels) + ",H,W] images");
  if (config_.image_size > 0 && (images.size(2) != config_.image_size || images.size(3) != config_.image_size))
    throw ShapeError("extractor expects " + std::to_string(config_.image_size) + "x" +
                     std::to_string(config_.image_size) + " images");
  FeatureBundle f;
  f.spatial = body_->forward(images);
  f.pooled = f.spatial.mean({2, 3});
  return f;
}

GroupHeadsImpl::GroupHeadsImpl(const AttributeSchema& schema, int in_features, bool multitask)
    : multitask_(multitask), in_features_(in_features) {
  if (multitask) {
    for (const auto& g : schema.groups()) {
      heads_.push_back(register_module("head_" + g.name, nn::Linear(in_features, g.num_classes())));
      for (int c = 0; c < g.num_classes(); ++c) class_index_.emplace_back(g.name, g.class_name(c));
    }
  } else {
    heads_.push_back(
        register_module("flat", nn::Linear(in_features, static_cast<std::int64_t>(schema.num_attributes()))));
    for (const auto& g : schema.groups())
      for (const auto& m : g.members) class_index_.emplace_back(g.name, m);
  }
}

GroupLogits GroupHeadsImpl::forward(const torch::Tensor& pooled) {
  if (pooled.dim() != 2 || pooled.size(1) != in_features_)
    throw ShapeError("heads expect [B," + std::to_string(in_features_) + "] features");
  GroupLogits out;
  out.multitask = multitask_;
  for (auto& h : heads_) out.logits.push_back(h->forward(pooled));
  return out;
}

torch::Tensor GroupHeadsImpl::weight_matrix() const {
  std::vector<torch::Tensor> w;
  for (const auto& h : heads_) w.push_back(h->weight);
  return torch::cat(w, 0);
}

torch::Tensor GroupHeadsImpl::bias_vector() const {
  std::vector<torch::Tensor> b;
  for (const auto& h : heads_) b.push_back(h->bias);
  return torch::cat(b, 0);
}

DiscriminatorImpl::DiscriminatorImpl(int in_channels, const std::vector<int>& hidden_widths, double leaky_slope)
    : in_channels_(in_channels) {
  if (hidden_widths.size() != 4) throw Error("discriminator needs 4 hidden widths (5 convolutions)");
  body_ = nn::Sequential();
  int in = in_channels;
  for (int w : hidden_widths) {
    body_->push_back(nn::Conv2d(conv3(in, w)));
    body_->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(leaky_slope)));
    in = w;
  }
  body_->push_back(nn::Conv2d(conv3(in, 1)));
  register_module("body", body_);
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& input) {
  if (input.dim() != 4 || input.size(1) != in_channels_)
    throw ShapeError("discriminator expects " + std::to_string(in_channels_) + " input channels, got " +
                     (input.dim() == 4 ? std::to_string(input.size(1)) : std::string("rank ") +
                                                                              std::to_string(input.dim())));
  return torch::sigmoid(body_->forward(input)).clamp(1e-7, 1.0 - 1e-7);
}

DaanNetImpl::DaanNetImpl(const ModelConfig& config, const AttributeSchema& schema) : config_(config) {
  extractor = register_module("extractor", Extractor(config));
  heads = register_module("heads", GroupHeads(schema, extractor->out_channels(), config.multitask));
  const int cf = extractor->out_channels();
  const int ca = attention_channels();
  for (auto id : {DiscriminatorId::Fs, DiscriminatorId::Ft, DiscriminatorId::As, DiscriminatorId::At}) {
    const bool feat = id == DiscriminatorId::Fs || id == DiscriminatorId::Ft;
    discs_[static_cast<std::size_t>(id)] = register_module(
        "disc_" + to_string(id), Discriminator(feat ? cf : ca, config.disc_widths, config.leaky_slope));
  }
}

int DaanNetImpl::attention_channels() const { return static_cast<int>(heads->class_index().size()); }

FeatureBundle DaanNetImpl::extract_features(const torch::Tensor& images) { return extractor->forward(images); }

GroupLogits DaanNetImpl::classify(const torch::Tensor& pooled) { return heads->forward(pooled); }

torch::Tensor DaanNetImpl::discriminate(const torch::Tensor& input, DiscriminatorId which) {
  return discriminator(which)->forward(input);
}

std::vector<torch::Tensor> DaanNetImpl::main_parameters() const {
  auto p = extractor->parameters();
  auto h = heads->parameters();
  p.insert(p.end(), h.begin(), h.end());
  return p;
}

std::vector<torch::Tensor> DaanNetImpl::discriminator_parameters() const {
  std::vector<torch::Tensor> p;
  for (const auto& d : discs_) {
    auto q = d->parameters();
    p.insert(p.end(), q.begin(), q.end());
  }
  return p;
}

std::vector<torch::Tensor> DaanNetImpl::discriminator_parameters(DiscriminatorId which) const {
  return discs_[static_cast<std::size_t>(which)]->parameters();
}

}  // namespace daan
