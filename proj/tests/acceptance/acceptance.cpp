// Acceptance checks: one PASS/FAIL line per criterion. Exit code 0 iff all
// selected criteria pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "daan/attention.hpp"
#include "daan/batches.hpp"
#include "daan/losses.hpp"
#include "daan/metrics.hpp"
#include "daan/synth.hpp"
#include "daan/trainer.hpp"
#include "gradcheck.hpp"
#include "routing.hpp"

using namespace daan;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 1: full-scale configuration

Outcome full_scale_config() {
  const TrainConfig c = TrainConfig::full_scale();
  std::vector<std::string> bad;
  auto expect = [&](const char* name, double got, double want) {
    if (got != want) bad.push_back(fmt("%s=%g (want %g)", name, got, want));
  };
  expect("batch_size", c.batch_size, 40);
  expect("lr", c.lr, 0.05);
  expect("momentum", c.momentum, 0.9);
  expect("weight_decay", c.weight_decay, 5e-4);
  expect("poly_power", c.poly_power, 0.75);
  expect("disc_lr", c.disc_lr, 1e-4);
  expect("lambda_l", c.weights.l, 0.02);
  expect("lambda_f", c.weights.f, 0.1);
  expect("lambda_a", c.weights.a, 0.1);
  if (c.model.backbone != BackboneKind::resnet50) bad.push_back("backbone is not resnet50");
  if (c.model.disc_widths != std::vector<int>{64, 128, 256, 512}) bad.push_back("discriminator widths differ");
  std::string detail = fmt(
      "full-scale config matches field-for-field; reference numbers (%s F1 %.4f, %s F1 %.4f) need the full "
      "caricature dataset and a ResNet-50 run and are not reproducible at desk scale",
      kReferenceDaanLfa.name, kReferenceDaanLfa.avg_f1, kReferenceSourceOnly.name, kReferenceSourceOnly.avg_f1);
  if (!bad.empty()) {
    detail.clear();
    for (const auto& b : bad) detail += b + "; ";
  }
  return {bad.empty(), detail};
}

// 2: finite-difference gradient suite

Outcome gradient_suite() {
  using test::check_gradients;
  const auto t0 = std::chrono::steady_clock::now();
  const auto opts = torch::TensorOptions().dtype(torch::kDouble);
  const LossWeights w;
  double worst = 0.0;
  std::string worst_name;
  int checks = 0;
  bool coords_ok = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    torch::manual_seed(seed);
    const auto targets = torch::stack({torch::randint(0, 3, {6}), torch::randint(0, 2, {6})}, 1).to(torch::kInt64);
    const auto binary = torch::randint(0, 2, {6, 5}, opts);
    auto scores = [&](std::vector<int64_t> shape) { return 0.05 + 0.9 * torch::rand(shape, opts); };
    std::vector<std::pair<const char*, test::GradCheck>> r;
    r.emplace_back("task_loss", check_gradients(
                                    [&](const auto& x) {
                                      return task_loss(GroupLogits{{x[0], x[1]}, true}, targets);
                                    },
                                    {torch::randn({6, 3}, opts), torch::randn({6, 2}, opts)}, 20, seed));
    r.emplace_back("flat_task_loss",
                   check_gradients([&](const auto& x) { return flat_task_loss(GroupLogits{{x[0]}, false}, binary); },
                                   {torch::randn({6, 5}, opts)}, 20, seed));
    r.emplace_back("label_consistency",
                   check_gradients([](const auto& x) { return label_consistency(x[0], x[1]); },
                                   {torch::rand({6, 5}, opts), torch::rand({6, 5}, opts)}, 20, seed));
    r.emplace_back("consistency_adversarial",
                   check_gradients([](const auto& x) { return consistency_adversarial(x[0]); },
                                   {scores({2, 1, 4, 4})}, 20, seed));
    r.emplace_back("discriminator_adversarial",
                   check_gradients([](const auto& x) { return discriminator_adversarial(x[0], x[1]); },
                                   {scores({2, 1, 4, 4}), scores({2, 1, 4, 4})}, 20, seed));
    r.emplace_back("inter_domain_loss",
                   check_gradients([&](const auto& x) { return inter_domain_loss(x[0], x[1], x[2], w).sum(); },
                                   {torch::rand({3}, opts), torch::rand({3}, opts), torch::rand({3}, opts)}, 20,
                                   seed));
    r.emplace_back("intra_domain_loss",
                   check_gradients(
                       [&](const auto& x) {
                         const IntraTerms<torch::Tensor> t{consistency_adversarial(x[0]),
                                                           consistency_adversarial(x[1]),
                                                           discriminator_adversarial(x[2], x[3]),
                                                           discriminator_adversarial(x[4], x[5]),
                                                           consistency_adversarial(x[6]),
                                                           consistency_adversarial(x[7]),
                                                           discriminator_adversarial(x[8], x[9]),
                                                           discriminator_adversarial(x[10], x[11])};
                         return intra_domain_loss(t, w);
                       },
                       [&] {
                         std::vector<torch::Tensor> in;
                         for (int i = 0; i < 12; ++i) in.push_back(scores({2, 1, 3, 3}));
                         return in;
                       }(),
                       20, seed));
    for (const auto& [name, g] : r) {
      ++checks;
      coords_ok &= g.coordinates == 20;
      if (g.max_rel_error >= worst) {
        worst = g.max_rel_error;
        worst_name = name;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-3 && coords_ok && secs < 60.0,
          fmt("%d loss/seed checks x 20 coords, max rel err %.2e (%s), %.1f s", checks, worst, worst_name.c_str(),
              secs)};
}

// 3: closed-form anchors

Outcome loss_anchors() {
  const double ln2 = std::log(2.0);
  const auto opts = torch::TensorOptions().dtype(torch::kDouble);
  std::vector<std::pair<const char*, double>> bce = {
      {"task_loss", task_loss(GroupLogits{{torch::zeros({4, 2}, opts)}, true}, torch::ones({4, 1}, torch::kInt64))
                        .item<double>()},
      {"flat_task_loss",
       flat_task_loss(GroupLogits{{torch::zeros({4, 1}, opts)}, false}, torch::ones({4, 1}, opts)).item<double>()},
      {"consistency_adversarial", consistency_adversarial(torch::full({2, 1, 4, 4}, 0.5, opts)).item<double>()},
      {"discriminator_adversarial",
       discriminator_adversarial(torch::full({2, 1, 4, 4}, 0.5, opts), torch::full({2, 1, 4, 4}, 0.5, opts))
           .item<double>()},
  };
  double worst = 0.0;
  for (const auto& [name, v] : bce) worst = std::max(worst, std::abs(v - ln2));
  torch::manual_seed(0);
  const auto p = torch::softmax(torch::randn({8, 7}, opts), 1);
  const double lab = label_consistency(p, p.clone()).item<double>();
  return {worst <= 1e-6 && std::abs(lab) <= 1e-9,
          fmt("%zu BCE terms at 0.5: max |v - ln2| = %.1e; identical label consistency = %.1e", bce.size(), worst,
              lab)};
}

// 4: CAM identities

Outcome cam_identities() {
  const auto schema = synth_schema();
  double mean_err = 0.0, lin_err = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    torch::manual_seed(1000 + draw);
    const int channels = 4 + draw % 13;
    GroupHeads heads(schema, channels, true);
    const auto spatial = torch::randn({3, channels, 3 + draw % 5, 4 + draw % 3});
    const FeatureBundle bundle{spatial, spatial.mean({2, 3})};
    const auto logits = torch::cat(heads->forward(bundle.pooled).logits, 1);
    const auto stack = cam_stack(bundle, *heads);
    const auto diff = stack.raw.mean({2, 3}) - (logits - heads->bias_vector().unsqueeze(0));
    mean_err = std::max(mean_err, diff.abs().max().item<double>());

    const auto f2 = torch::randn_like(spatial[0]);
    const auto w = heads->weight_matrix();
    const auto a = 1.5 - 0.01 * draw, b = -0.7 + 0.02 * draw;
    lin_err = std::max(lin_err, (compute_cam(a * spatial[0] + b * f2, w[0]) -
                                 (a * compute_cam(spatial[0], w[0]) + b * compute_cam(f2, w[0])))
                                    .abs()
                                    .max()
                                    .item<double>());
    lin_err = std::max(lin_err, (compute_cam(spatial[1], a * w[1] + b * w[2]) -
                                 (a * compute_cam(spatial[1], w[1]) + b * compute_cam(spatial[1], w[2])))
                                    .abs()
                                    .max()
                                    .item<double>());
  }
  return {mean_err <= 1e-5 && lin_err <= 1e-5,
          fmt("100 draws: max |mean CAM - (logit - bias)| = %.1e, max linearity err = %.1e", mean_err, lin_err)};
}

// 5: metric oracle

ConfusionCounts count_by_hand(const std::vector<LabelVector>& p, const std::vector<LabelVector>& y, std::size_t a) {
  ConfusionCounts c;
  for (std::size_t s = 0; s < p.size(); ++s) {
    if (p[s][a] && y[s][a]) ++c.tp;
    if (p[s][a] && !y[s][a]) ++c.fp;
    if (!p[s][a] && !y[s][a]) ++c.tn;
    if (!p[s][a] && y[s][a]) ++c.fn;
  }
  return c;
}

bool same_metrics(const AttributeMetrics& m, const std::vector<LabelVector>& p, const std::vector<LabelVector>& y) {
  double acc = 0.0, f1 = 0.0;
  for (std::size_t a = 0; a < m.size(); ++a) {
    const auto c = count_by_hand(p, y, a);
    if (!(m.counts[a] == c)) return false;
    acc += static_cast<double>(c.tp + c.tn) / p.size();
    const double prec = c.tp + c.fp ? static_cast<double>(c.tp) / (c.tp + c.fp) : 0.0;
    const double rec = c.tp + c.fn ? static_cast<double>(c.tp) / (c.tp + c.fn) : 0.0;
    f1 += prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
  }
  return std::abs(m.avg_acc - acc / m.size()) < 1e-12 && std::abs(m.avg_f1 - f1 / m.size()) < 1e-12;
}

Outcome metric_oracle() {
  std::string text;
  for (int a = 0; a < 10; ++a) text += "g" + std::to_string(a) + ": a" + std::to_string(a) + "\n";
  const auto schema = AttributeSchema::parse(text);
  ModelConfig mc;
  mc.cnn_widths = {8, 8};
  mc.image_size = 8;
  int agree = 0;
  for (int pair = 0; pair < 50; ++pair) {
    std::mt19937_64 rng(pair);
    std::bernoulli_distribution bit(0.2 + 0.6 * (pair % 7) / 6.0);
    torch::manual_seed(pair);
    DaanNet net(mc, schema);
    Dataset data(schema, Domain::target, Split::test);
    const auto images = torch::randn({200, 1, 8, 8}) * (1.0 + pair % 4);
    for (int s = 0; s < 200; ++s) {
      Sample smp;
      smp.id = "x" + std::to_string(s);
      smp.domain = Domain::target;
      smp.image = Image(1, 8, 8);
      const auto img = images[s].contiguous();
      std::copy_n(img.data_ptr<float>(), 64, smp.image.pixels.begin());
      LabelVector y(10);
      for (auto& b : y) b = bit(rng);
      smp.labels = y;
      data.add(std::move(smp));
    }
    const auto m = evaluate(*net, schema, data, 64);
    std::vector<LabelVector> preds, labels;
    for (std::size_t s = 0; s < 200; ++s) labels.push_back(*data[s].labels);
    const auto all = predict(*net, schema, images);
    preds.assign(all.begin(), all.end());
    agree += same_metrics(m, preds, labels);
  }
  return {agree == 50, fmt("%d/50 random 200x10 evaluations equal brute-force counting", agree)};
}

// 6: gradient routing

Outcome gradient_routing() {
  std::vector<std::string> errors;
  int configs = 0;
  for (Method m : {Method::source_only, Method::target_only, Method::daan_l, Method::daan_f, Method::daan_a,
                   Method::daan_lf, Method::daan_la, Method::daan_lfa}) {
    for (auto e : test::check_routing(m, TranslatorMode::analytic)) errors.push_back(e);
    ++configs;
  }
  for (auto e : test::check_routing(Method::daan_lfa, TranslatorMode::learned)) errors.push_back(e);
  ++configs;
  std::string detail = fmt("%d method/translator configurations, %zu violations", configs, errors.size());
  for (std::size_t i = 0; i < std::min<std::size_t>(errors.size(), 3); ++i) detail += "; " + errors[i];
  return {errors.empty(), detail};
}

// 7, 8, 10: desk-scale experiments

struct DeskData {
  SynthConfig train_config;
  SynthDomains train;
  SynthDomains test;
};

DeskData make_desk_data() {
  SynthConfig c;
  c.n_per_domain = 2000;
  c.style_gap = 0.7;
  SynthConfig t = c;
  t.id_prefix = "test";
  t.split = Split::test;
  t.n_per_domain = 500;
  return {c, synth_generate(c), synth_generate(t)};
}

struct DeskRun {
  double macro_f1 = 0.0;
  double seconds = 0.0;
  std::unique_ptr<Trainer> trainer;
};

DeskRun desk_run(const DeskData& d, Method method, std::uint64_t seed, bool multitask = true) {
  TrainConfig c = TrainConfig::desk_scale();
  c.method = method;
  c.seed = seed;
  c.model.multitask = multitask;
  const auto t0 = std::chrono::steady_clock::now();
  DeskRun r;
  r.trainer = std::make_unique<Trainer>(c, d.train.source.schema(), make_translator(c, &d.train_config));
  if (method == Method::target_only) {
    run_steps(*r.trainer, d.train.target, std::nullopt, c.total_steps);
  } else if (method == Method::source_only) {
    run_steps(*r.trainer, d.train.source, std::nullopt, c.total_steps);
  } else {
    run_steps(*r.trainer, d.train.source, UnlabeledView(d.train.target), c.total_steps);
  }
  r.trainer->net()->eval();
  r.macro_f1 = evaluate(*r.trainer->net(), r.trainer->schema(), d.test.target).avg_f1;
  r.seconds = seconds_since(t0);
  std::printf("  %s seed %llu%s: target macro-F1 %.4f (%.0f s)\n", to_string(method).c_str(),
              static_cast<unsigned long long>(seed), multitask ? "" : " flat", r.macro_f1, r.seconds);
  std::fflush(stdout);
  return r;
}

std::vector<std::unique_ptr<Trainer>> g_lfa_runs;

Outcome adaptation_experiment(const DeskData& d) {
  const auto t0 = std::chrono::steady_clock::now();
  std::map<Method, std::vector<double>> f1;
  g_lfa_runs.clear();
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    for (Method m : {Method::source_only, Method::daan_l, Method::daan_lfa}) {
      auto r = desk_run(d, m, seed);
      f1[m].push_back(r.macro_f1);
      if (m == Method::daan_lfa) g_lfa_runs.push_back(std::move(r.trainer));
    }
  const double so = median(f1[Method::source_only]), l = median(f1[Method::daan_l]), lfa = median(f1[Method::daan_lfa]);
  const double secs = seconds_since(t0);
  return {lfa >= so + 0.03 && lfa >= l - 0.005 && secs <= 1800.0,
          fmt("median macro-F1: source_only %.4f, daan_l %.4f, daan_lfa %.4f (needs >= %.4f and >= %.4f); %.0f s",
              so, l, lfa, so + 0.03, l - 0.005, secs)};
}

Outcome multitask_direction(const DeskData& d) {
  std::vector<double> grouped, flat;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    grouped.push_back(desk_run(d, Method::target_only, seed, true).macro_f1);
    flat.push_back(desk_run(d, Method::target_only, seed, false).macro_f1);
  }
  const double g = median(grouped), f = median(flat);
  return {g >= f - 0.005, fmt("target_only median macro-F1: grouped %.4f, flat %.4f", g, f)};
}

Outcome cam_localization(const DeskData& d) {
  if (g_lfa_runs.empty())
    for (std::uint64_t seed = 0; seed < 3; ++seed) g_lfa_runs.push_back(desk_run(d, Method::daan_lfa, seed).trainer);
  const auto& schema = d.test.target.schema();
  std::size_t shape_group = 0;
  while (schema.groups()[shape_group].name != "shape") ++shape_group;
  std::vector<double> fractions;
  for (auto& trainer : g_lfa_runs) {
    auto& net = trainer->net();
    net->eval();
    const auto& index = net->heads->class_index();
    std::vector<std::size_t> idx(200);
    std::iota(idx.begin(), idx.end(), 0);
    torch::NoGradGuard no_grad;
    const auto batch = gather_images(UnlabeledView(d.test.target), idx);
    const auto stack = cam_stack(net->extract_features(batch.images), *net->heads);
    const int h = d.test.target[0].image.height, w = d.test.target[0].image.width;
    int inside = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto target = schema.group_targets(*d.test.target[i].labels)[shape_group];
      const std::string cls = schema.groups()[shape_group].class_name(target);
      std::size_t k = 0;
      while (!(index[k].first == "shape" && index[k].second == cls)) ++k;
      const auto map = torch::nn::functional::interpolate(
          stack.raw[i][static_cast<std::int64_t>(k)].unsqueeze(0).unsqueeze(0),
          torch::nn::functional::InterpolateFuncOptions()
              .size(std::vector<int64_t>{h, w})
              .mode(torch::kBilinear)
              .align_corners(false));
      const auto arg = map.flatten().argmax().item<std::int64_t>();
      inside += d.test.target_render[i].contains(static_cast<int>(arg % w), static_cast<int>(arg / w));
    }
    fractions.push_back(inside / 200.0);
  }
  std::string per;
  for (double f : fractions) per += fmt(" %.3f", f);
  const double m = median(fractions);
  return {m >= 0.8, fmt("shape-group CAM argmax inside the shape box: median %.3f over daan_lfa seeds (%s )", m,
                        per.c_str())};
}

// 9: determinism and resume

Outcome determinism_and_resume() {
  SynthConfig sc;
  sc.n_per_domain = 64;
  const auto data = synth_generate(sc);
  TrainConfig c = TrainConfig::desk_scale();
  c.method = Method::daan_lfa;
  c.seed = 11;
  c.total_steps = 10;
  const UnlabeledView target(data.target);
  auto trace = [&](const std::vector<LossReport>& h) {
    std::vector<std::string> rows;
    for (const auto& r : h) rows.push_back(r.csv_row());
    return rows;
  };
  Trainer a(c, data.source.schema(), make_translator(c, &sc));
  Trainer b(c, data.source.schema(), make_translator(c, &sc));
  const auto ha = run_steps(a, data.source, target, 10);
  const auto hb = run_steps(b, data.source, target, 10);
  bool rerun = trace(ha) == trace(hb);
  for (std::size_t i = 0; i < ha.size(); ++i) rerun &= ha[i] == hb[i];

  const fs::path ck = fs::temp_directory_path() / ("daan_acceptance_resume_" + std::to_string(::getpid()) + ".pt");
  Trainer first(c, data.source.schema(), make_translator(c, &sc));
  auto head = run_steps(first, data.source, target, 6);
  first.save(ck.string());
  Trainer second(c, data.source.schema(), make_translator(c, &sc));
  second.load(ck.string());
  const auto tail = run_steps(second, data.source, target, 4);
  fs::remove(ck);
  head.insert(head.end(), tail.begin(), tail.end());
  bool resume = trace(head) == trace(ha);
  for (std::size_t i = 0; i < ha.size(); ++i) resume &= head[i] == ha[i];
  return {rerun && resume,
          fmt("10-step daan_lfa traces: rerun %s, resume after 6 steps %s", rerun ? "identical" : "DIFFERENT",
              resume ? "identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected(only.begin(), only.end());
  auto wanted = [&](int n) { return selected.empty() || selected.count(n); };

  torch::set_num_threads(1);
  std::unique_ptr<DeskData> desk;
  auto desk_data = [&]() -> const DeskData& {
    if (!desk) desk = std::make_unique<DeskData>(make_desk_data());
    return *desk;
  };

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, full_scale_config},
      {2, gradient_suite},
      {3, loss_anchors},
      {4, cam_identities},
      {5, metric_oracle},
      {6, gradient_routing},
      {7, [&] { return adaptation_experiment(desk_data()); }},
      {8, [&] { return multitask_direction(desk_data()); }},
      {9, determinism_and_resume},
      {10, [&] { return cam_localization(desk_data()); }},
  };
  int failures = 0;
  for (const auto& [n, fn] : criteria) {
    if (!wanted(n)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %d: %s  %s\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
