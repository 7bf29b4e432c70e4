#include "daan/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "daan/checkpoint.hpp"
#include "daan/config.hpp"
#include "daan/error.hpp"

namespace fs = std::filesystem;

namespace daan {

std::string to_string(Method m) {
  switch (m) {
    case Method::source_only:
      return "source_only";
    case Method::target_only:
      return "target_only";
    case Method::daan_l:
      return "daan_l";
    case Method::daan_f:
      return "daan_f";
    case Method::daan_a:
      return "daan_a";
    case Method::daan_lf:
      return "daan_lf";
    case Method::daan_la:
      return "daan_la";
    case Method::daan_lfa:
      return "daan_lfa";
  }
  return "?";
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> all = {Method::source_only, Method::target_only, Method::daan_l,
                                          Method::daan_f,      Method::daan_a,      Method::daan_lf,
                                          Method::daan_la,     Method::daan_lfa};
  return all;
}

Method method_from_string(const std::string& s) {
  for (Method m : all_methods())
    if (to_string(m) == s) return m;
  throw Error("unknown method '" + s +
              "' (expected source_only, target_only, daan_l, daan_f, daan_a, daan_lf, daan_la or daan_lfa)");
}

AblationFlags flags_for(Method m) {
  switch (m) {
    case Method::source_only:
    case Method::target_only:
      return {false, false, false, false};
    case Method::daan_l:
      return {true, true, false, false};
    case Method::daan_f:
      return {true, false, true, false};
    case Method::daan_a:
      return {true, false, false, true};
    case Method::daan_lf:
      return {true, true, true, false};
    case Method::daan_la:
      return {true, true, false, true};
    case Method::daan_lfa:
      return {true, true, true, true};
  }
  return {};
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error("batch_size must be >= 1");
  if (!(lr > 0) || !(disc_lr > 0) || !(translator_lr > 0)) throw Error("learning rates must be > 0");
  if (momentum < 0 || weight_decay < 0 || poly_power < 0) throw Error("momentum, weight_decay, poly_power must be >= 0");
  if (total_steps < 0) throw Error("total_steps must be >= 0");
  if (checkpoint_every < 0) throw Error("checkpoint_every must be >= 0");
}

TrainConfig TrainConfig::full_scale() {
  TrainConfig c;
  c.model.backbone = BackboneKind::resnet50;
  c.model.in_channels = 3;
  c.model.image_size = 0;
  c.model.disc_widths = {64, 128, 256, 512};
  c.translator = TranslatorMode::learned;
  return c;
}

TrainConfig TrainConfig::desk_scale() {
  TrainConfig c;
  c.batch_size = 16;
  c.lr = 0.02;
  c.total_steps = 2000;
  c.model.backbone = BackboneKind::small_cnn;
  c.model.in_channels = 1;
  c.model.image_size = 32;
  c.model.cnn_widths = {16, 32, 32};
  c.model.cnn_pooled_blocks = 1;
  c.model.disc_widths = {16, 16, 16, 16};
  c.translator = TranslatorMode::analytic;
  return c;
}

double lr_at(std::int64_t step, const TrainConfig& config) {
  if (config.total_steps < 1 || step < 0 || step > config.total_steps)
    throw Error("lr_at: step " + std::to_string(step) + " outside [0, " + std::to_string(config.total_steps) + "]");
  const double frac = 1.0 - static_cast<double>(step) / static_cast<double>(config.total_steps);
  return config.lr * std::pow(frac, config.poly_power);
}

namespace {

void accumulate(torch::Tensor& sum, const torch::Tensor& t, double w = 1.0) {
  if (!t.defined()) return;
  auto term = w == 1.0 ? t : w * t;
  sum = sum.defined() ? sum + term : term;
}

/// Marks parameters as constants while a graph is recorded.
class FreezeGuard {
 public:
  explicit FreezeGuard(std::vector<torch::Tensor> params) : params_(std::move(params)) {
    for (auto& p : params_) p.set_requires_grad(false);
  }
  ~FreezeGuard() {
    for (auto& p : params_) p.set_requires_grad(true);
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  std::vector<torch::Tensor> params_;
};

std::vector<torch::Tensor> snapshot(const std::vector<torch::Tensor>& params) {
  std::vector<torch::Tensor> s;
  s.reserve(params.size());
  for (const auto& p : params) s.push_back(p.detach().clone());
  return s;
}

void expect_unchanged(const std::vector<torch::Tensor>& before, const std::vector<torch::Tensor>& params,
                      const char* what) {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!torch::equal(before[i], params[i].detach())) throw Error(std::string(what));
}

double value(const torch::Tensor& t) { return t.defined() ? t.detach().item<double>() : 0.0; }

}  // namespace

torch::Tensor StepGraph::discriminator_objective(const LossWeights& w) const {
  torch::Tensor sum;
  accumulate(sum, feat_adv_s);
  accumulate(sum, feat_adv_t);
  accumulate(sum, att_adv_s);
  accumulate(sum, att_adv_t);
  accumulate(sum, translator_d, w.D);
  return sum;
}

torch::Tensor StepGraph::main_objective(const LossWeights& w) const {
  torch::Tensor sum;
  accumulate(sum, lc_s);
  accumulate(sum, lc_s2t);
  accumulate(sum, translator_g, w.G);
  accumulate(sum, lab_consis, w.l);
  accumulate(sum, feat_consis_s, w.f);
  accumulate(sum, feat_consis_t, w.f);
  accumulate(sum, att_consis_s, w.a);
  accumulate(sum, att_consis_t, w.a);
  return sum;
}

struct Trainer::Forward {
  AblationFlags flags;
  torch::Tensor x_s, x_t, x_s2t, x_t2s;
  FeatureBundle fs, fs2t, ft, ft2s;
  GroupLogits ls, ls2t, lt, lt2s;
  torch::Tensor as, as2t, at, at2s;  // normalized attention stacks
};

Trainer::Trainer(TrainConfig config, AttributeSchema schema, std::unique_ptr<Translator> translator)
    : config_(std::move(config)), schema_(std::move(schema)), translator_(std::move(translator)) {
  config_.validate();
  if (!translator_) translator_ = std::make_unique<FrozenTranslator>();
  torch::manual_seed(config_.seed);
  net_ = DaanNet(config_.model, schema_);

  main_opt_ = std::make_unique<torch::optim::SGD>(
      net_->main_parameters(),
      torch::optim::SGDOptions(config_.lr).momentum(config_.momentum).weight_decay(config_.weight_decay));
  auto disc = net_->discriminator_parameters();
  auto tdisc = translator_->discriminator_parameters();
  disc.insert(disc.end(), tdisc.begin(), tdisc.end());
  disc_opt_ = std::make_unique<torch::optim::Adam>(
      disc, torch::optim::AdamOptions(config_.disc_lr).betas({config_.adam_beta1, config_.adam_beta2}));
  if (auto gen = translator_->generator_parameters(); !gen.empty()) {
    gen_opt_ = std::make_unique<torch::optim::Adam>(
        gen, torch::optim::AdamOptions(config_.translator_lr).betas({config_.adam_beta1, config_.adam_beta2}));
  }
}

std::vector<torch::Tensor> Trainer::main_side_parameters() const {
  auto p = net_->main_parameters();
  auto g = translator_->generator_parameters();
  p.insert(p.end(), g.begin(), g.end());
  return p;
}

std::vector<torch::Tensor> Trainer::discriminator_side_parameters() const {
  auto p = net_->discriminator_parameters();
  auto d = translator_->discriminator_parameters();
  p.insert(p.end(), d.begin(), d.end());
  return p;
}

Trainer::Forward Trainer::run_forward(const LabeledBatch& source, const ImageBatch* target) {
  Forward f;
  f.flags = config_.flags();
  f.x_s = source.images;
  if (!f.flags.use_translator) {
    f.fs = net_->extract_features(f.x_s);
    f.ls = net_->classify(f.fs.pooled);
    return f;
  }
  if (!target) throw Error(to_string(config_.method) + " needs a target batch");
  f.x_t = target->images;
  f.x_s2t = translator_->translate(f.x_s, source.ids, Direction::s2t);
  f.x_t2s = translator_->translate(f.x_t, target->ids, Direction::t2s);

  // One extractor pass over all four inputs; parameters are shared.
  const std::vector<std::int64_t> sizes = {f.x_s.size(0), f.x_s2t.size(0), f.x_t.size(0), f.x_t2s.size(0)};
  const auto all = net_->extract_features(torch::cat({f.x_s, f.x_s2t, f.x_t, f.x_t2s}, 0));
  const auto spatial = all.spatial.split_with_sizes(sizes, 0);
  const auto pooled = all.pooled.split_with_sizes(sizes, 0);
  FeatureBundle* bundles[4] = {&f.fs, &f.fs2t, &f.ft, &f.ft2s};
  for (std::size_t i = 0; i < 4; ++i) *bundles[i] = {spatial[i], pooled[i]};

  const auto logits = net_->classify(all.pooled);
  GroupLogits* outs[4] = {&f.ls, &f.ls2t, &f.lt, &f.lt2s};
  for (auto* o : outs) o->multitask = logits.multitask;
  for (const auto& l : logits.logits) {
    const auto parts = l.split_with_sizes(sizes, 0);
    for (std::size_t i = 0; i < 4; ++i) outs[i]->logits.push_back(parts[i]);
  }

  if (f.flags.use_att) {
    const auto stack = cam_stack(all, *net_->heads);
    const auto maps = stack.maps.split_with_sizes(sizes, 0);
    f.as = maps[0];
    f.as2t = maps[1];
    f.at = maps[2];
    f.at2s = maps[3];
  }
  return f;
}

void Trainer::add_discriminator_terms(const Forward& f, StepGraph& g) {
  if (!f.flags.use_translator) return;
  if (f.flags.use_feat) {
    g.feat_adv_s = discriminator_adversarial(net_->discriminate(f.fs.spatial.detach(), DiscriminatorId::Fs),
                                             net_->discriminate(f.ft2s.spatial.detach(), DiscriminatorId::Fs));
    g.feat_adv_t = discriminator_adversarial(net_->discriminate(f.fs2t.spatial.detach(), DiscriminatorId::Ft),
                                             net_->discriminate(f.ft.spatial.detach(), DiscriminatorId::Ft));
  }
  if (f.flags.use_att) {
    g.att_adv_s = discriminator_adversarial(net_->discriminate(f.as.detach(), DiscriminatorId::As),
                                            net_->discriminate(f.at2s.detach(), DiscriminatorId::As));
    g.att_adv_t = discriminator_adversarial(net_->discriminate(f.as2t.detach(), DiscriminatorId::At),
                                            net_->discriminate(f.at.detach(), DiscriminatorId::At));
  }
  if (translator_->mode() == TranslatorMode::learned)
    g.translator_d = translator_->discriminator_loss(f.x_s, f.x_t, f.x_s2t, f.x_t2s);
}

void Trainer::add_main_terms(const Forward& f, const LabeledBatch& source, StepGraph& g) {
  auto task = [&](const GroupLogits& l) {
    return l.multitask ? task_loss(l, source.group_targets) : flat_task_loss(l, source.binary);
  };
  g.lc_s = task(f.ls);
  if (!f.flags.use_translator) return;
  g.lc_s2t = task(f.ls2t);
  if (translator_->mode() == TranslatorMode::learned)
    g.translator_g = translator_->generator_loss(f.x_s, f.x_t, f.x_s2t, f.x_t2s);
  if (f.flags.use_label) g.lab_consis = label_consistency(f.lt.probabilities(), f.lt2s.probabilities());
  if (f.flags.use_feat) {
    g.feat_consis_s = consistency_adversarial(net_->discriminate(f.ft2s.spatial, DiscriminatorId::Fs));
    g.feat_consis_t = consistency_adversarial(net_->discriminate(f.ft.spatial, DiscriminatorId::Ft));
  }
  if (f.flags.use_att) {
    g.att_consis_s = consistency_adversarial(net_->discriminate(f.at2s, DiscriminatorId::As));
    g.att_consis_t = consistency_adversarial(net_->discriminate(f.at, DiscriminatorId::At));
  }
}

StepGraph Trainer::build_discriminator_terms(const LabeledBatch& source, const ImageBatch* target) {
  const Forward f = run_forward(source, target);
  StepGraph g;
  add_discriminator_terms(f, g);
  return g;
}

StepGraph Trainer::build_terms(const LabeledBatch& source, const ImageBatch* target) {
  const Forward f = run_forward(source, target);
  StepGraph g;
  add_discriminator_terms(f, g);
  FreezeGuard guard(discriminator_side_parameters());
  add_main_terms(f, source, g);
  return g;
}

LossReport Trainer::train_step(const LabeledBatch& source, const ImageBatch* target) {
  net_->train();
  const double lr = lr_at(step_, config_);
  for (auto& group : main_opt_->param_groups())
    static_cast<torch::optim::SGDOptions&>(group.options()).lr(lr);

  LossReport report(config_.weights);
  report.step = step_;
  report.learning_rate = lr;
  report.translator_losses_inactive =
      config_.flags().use_translator && translator_->mode() != TranslatorMode::learned;

  const Forward f = run_forward(source, target);
  StepGraph g;

  // Phase A: discriminators on detached inputs.
  add_discriminator_terms(f, g);
  report.set(Term::L_feat_adv_s, value(g.feat_adv_s));
  report.set(Term::L_feat_adv_t, value(g.feat_adv_t));
  report.set(Term::L_att_adv_s, value(g.att_adv_s));
  report.set(Term::L_att_adv_t, value(g.att_adv_t));
  report.set(Term::L_D, value(g.translator_d));
  report.check_finite();
  if (auto dobj = g.discriminator_objective(config_.weights); dobj.defined()) {
    std::vector<torch::Tensor> before;
    const auto main_params = main_side_parameters();
    if (config_.verify_phases) before = snapshot(main_params);
    disc_opt_->zero_grad();
    dobj.backward();
    disc_opt_->step();
    if (config_.verify_phases)
      expect_unchanged(before, main_params, "discriminator phase changed a main-side parameter");
  }

  // Phase B: recognition network against the updated, frozen discriminators.
  {
    FreezeGuard guard(discriminator_side_parameters());
    add_main_terms(f, source, g);
  }
  report.set(Term::Lc_s, value(g.lc_s));
  report.set(Term::Lc_s2t, value(g.lc_s2t));
  report.set(Term::L_lab_consis, value(g.lab_consis));
  report.set(Term::L_G, value(g.translator_g));
  report.set(Term::L_feat_consis_s, value(g.feat_consis_s));
  report.set(Term::L_feat_consis_t, value(g.feat_consis_t));
  report.set(Term::L_att_consis_s, value(g.att_consis_s));
  report.set(Term::L_att_consis_t, value(g.att_consis_t));
  report.finalize();
  report.check_finite();

  std::vector<torch::Tensor> before;
  const auto disc_params = discriminator_side_parameters();
  if (config_.verify_phases) before = snapshot(disc_params);
  main_opt_->zero_grad();
  if (gen_opt_) gen_opt_->zero_grad();
  g.main_objective(config_.weights).backward();
  main_opt_->step();
  if (gen_opt_) gen_opt_->step();
  if (config_.verify_phases) expect_unchanged(before, disc_params, "main phase changed a discriminator parameter");

  ++step_;
  return report;
}

void Trainer::save(const std::string& path) const {
  torch::serialize::OutputArchive ar;
  write_string(ar, "schema_text", schema_.serialize());
  ar.write("schema_hash", torch::tensor(static_cast<std::int64_t>(schema_.hash()), torch::kInt64));
  write_string(ar, "config_text", to_config_text(config_));
  ar.write("step", torch::tensor(step_, torch::kInt64));
  write_network(ar, const_cast<DaanNetImpl&>(*net_));
  auto sub = [&](const char* name, const auto& writer) {
    torch::serialize::OutputArchive s;
    writer(s);
    ar.write(name, s);
  };
  sub("opt_main", [&](auto& s) { main_opt_->save(s); });
  sub("opt_disc", [&](auto& s) { disc_opt_->save(s); });
  if (gen_opt_) sub("opt_gen", [&](auto& s) { gen_opt_->save(s); });
  sub("translator", [&](auto& s) { translator_->save(s); });
  const std::string tmp = path + ".tmp";
  ar.save_to(tmp);
  fs::rename(tmp, path);
}

void Trainer::load(const std::string& path) {
  torch::serialize::InputArchive ar;
  ar.load_from(path);
  check_schema_hash(ar, schema_, path);
  torch::Tensor step;
  ar.read("step", step);
  read_network(ar, *net_);
  auto sub = [&](const char* name, const auto& reader) {
    torch::serialize::InputArchive s;
    ar.read(name, s);
    reader(s);
  };
  sub("opt_main", [&](auto& s) { main_opt_->load(s); });
  sub("opt_disc", [&](auto& s) { disc_opt_->load(s); });
  if (gen_opt_) sub("opt_gen", [&](auto& s) { gen_opt_->load(s); });
  sub("translator", [&](auto& s) { translator_->load(s); });
  step_ = step.item<std::int64_t>();
}

namespace {

BatchStream stream_for(const Trainer& trainer, const Dataset& source, const std::optional<UnlabeledView>& target) {
  const auto& c = trainer.config();
  const std::size_t tsize = target && !target->empty() ? target->size() : source.size();
  BatchStream stream(source.size(), tsize, c.batch_size, c.seed ^ 0x6261746368ULL);
  stream.seek(trainer.step());
  return stream;
}

LossReport run_one(Trainer& trainer, BatchStream& stream, const Dataset& source,
                   const std::optional<UnlabeledView>& target) {
  const auto idx = stream.next();
  const auto s = gather_labeled(source, idx.source);
  if (target && trainer.config().flags().use_translator) {
    const auto t = gather_images(*target, idx.target);
    return trainer.train_step(s, &t);
  }
  return trainer.train_step(s, nullptr);
}

}  // namespace

std::vector<LossReport> run_steps(Trainer& trainer, const Dataset& source, const std::optional<UnlabeledView>& target,
                                  std::int64_t steps) {
  if (trainer.config().flags().use_translator && (!target || target->empty()))
    throw Error(to_string(trainer.config().method) + " needs unlabeled target data");
  auto stream = stream_for(trainer, source, target);
  std::vector<LossReport> history;
  for (std::int64_t i = 0; i < steps; ++i) history.push_back(run_one(trainer, stream, source, target));
  return history;
}

FitResult fit(Trainer& trainer, const Dataset& source, const std::optional<UnlabeledView>& target,
              const std::string& out_dir) {
  const auto& c = trainer.config();
  if (c.flags().use_translator && (!target || target->empty()))
    throw Error(to_string(c.method) + " needs unlabeled target data");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create output directory " + out_dir + ": " + ec.message());

  const fs::path log_path = fs::path(out_dir) / "train_log.csv";
  const bool resume = trainer.step() > 0 && fs::exists(log_path);
  std::ofstream log(log_path, resume ? std::ios::app : std::ios::trunc);
  if (!log) throw Error("cannot write " + log_path.string());
  if (!resume) log << LossReport::csv_header() << '\n';

  FitResult result;
  auto stream = stream_for(trainer, source, target);
  while (trainer.step() < c.total_steps) {
    auto report = run_one(trainer, stream, source, target);
    log << report.csv_row() << '\n';
    if (!log) throw Error("write failed for " + log_path.string());
    result.history.push_back(std::move(report));
    if (c.checkpoint_every > 0 && trainer.step() % c.checkpoint_every == 0 && trainer.step() < c.total_steps) {
      const auto p = fs::path(out_dir) / ("checkpoint_" + std::to_string(trainer.step()) + ".pt");
      trainer.save(p.string());
    }
  }
  log.flush();
  result.checkpoint = (fs::path(out_dir) / "checkpoint.pt").string();
  trainer.save(result.checkpoint);
  return result;
}

std::unique_ptr<Translator> make_translator(const TrainConfig& config, const SynthConfig* synth,
                                            const std::string& frozen_s2t, const std::string& frozen_t2s,
                                            const AttributeSchema* schema) {
  switch (config.translator) {
    case TranslatorMode::analytic:
      if (!synth) throw Error("analytic translator needs the synthetic renderer config");
      return std::make_unique<AnalyticTranslator>(*synth);
    case TranslatorMode::learned: {
      LearnedTranslatorConfig tc;
      tc.channels = config.model.in_channels;
      torch::manual_seed(config.seed ^ 0x7472616e73ULL);
      return std::make_unique<LearnedTranslator>(tc);
    }
    case TranslatorMode::frozen:
      if (!frozen_s2t.empty() || !frozen_t2s.empty()) {
        if (frozen_s2t.empty() || frozen_t2s.empty() || !schema)
          throw Error("frozen translator needs both s2t and t2s manifests");
        return FrozenTranslator::from_manifests(frozen_s2t, frozen_t2s, *schema);
      }
      return std::make_unique<FrozenTranslator>();
  }
  throw Error("unknown translator mode");
}

}  // namespace daan
