// Gradient routing checks for one training method: ablated terms are
// absent, each phase's objective reaches only its own parameter side and
// unused discriminators never receive gradient or updates.

#pragma once

#include <string>
#include <vector>

#include "daan/batches.hpp"
#include "daan/synth.hpp"
#include "daan/trainer.hpp"

namespace daan::test {

inline void clear_grads(const std::vector<torch::Tensor>& params) {
  for (auto p : params) p.mutable_grad() = torch::Tensor();
}

inline bool all_zero_grads(const std::vector<torch::Tensor>& params) {
  for (const auto& p : params)
    if (p.grad().defined() && p.grad().abs().sum().item<double>() != 0.0) return false;
  return true;
}

inline bool any_nonzero_grad(const std::vector<torch::Tensor>& params) { return !all_zero_grads(params); }

/// Returns a list of violations; empty when routing is correct.
inline std::vector<std::string> check_routing(Method method, TranslatorMode mode = TranslatorMode::analytic,
                                              std::uint64_t seed = 0) {
  std::vector<std::string> errors;
  auto fail = [&](const std::string& e) {
    errors.push_back(to_string(method) + "/" + to_string(mode) + ": " + e);
  };

  SynthConfig sc;
  sc.n_per_domain = 8;
  sc.seed = seed + 1;
  const auto data = synth_generate(sc);
  TrainConfig c = TrainConfig::desk_scale();
  c.method = method;
  c.batch_size = 4;
  c.total_steps = 4;
  c.seed = seed;
  c.verify_phases = true;
  c.translator = mode;
  Trainer trainer(c, data.source.schema(), make_translator(c, &sc));

  const std::vector<std::size_t> idx{0, 1, 2, 3};
  const auto src = gather_labeled(data.source, idx);
  auto tgt = gather_images(UnlabeledView(data.target), idx);
  tgt.images = tgt.images.clone().set_requires_grad(true);

  const AblationFlags f = c.flags();
  StepGraph g = trainer.build_terms(src, &tgt);
  auto expect_present = [&](const torch::Tensor& t, bool present, const char* name) {
    if (t.defined() != present) fail(std::string(name) + (present ? " missing" : " present although ablated"));
  };
  expect_present(g.lc_s, true, "Lc_s");
  expect_present(g.lc_s2t, f.use_translator, "Lc_s2t");
  expect_present(g.lab_consis, f.use_label, "L_lab_consis");
  expect_present(g.feat_adv_s, f.use_feat, "L_feat_adv_s");
  expect_present(g.feat_adv_t, f.use_feat, "L_feat_adv_t");
  expect_present(g.feat_consis_s, f.use_feat, "L_feat_consis_s");
  expect_present(g.feat_consis_t, f.use_feat, "L_feat_consis_t");
  expect_present(g.att_adv_s, f.use_att, "L_att_adv_s");
  expect_present(g.att_adv_t, f.use_att, "L_att_adv_t");
  expect_present(g.att_consis_s, f.use_att, "L_att_consis_s");
  expect_present(g.att_consis_t, f.use_att, "L_att_consis_t");
  const bool learned = f.use_translator && mode == TranslatorMode::learned;
  expect_present(g.translator_g, learned, "L_G");
  expect_present(g.translator_d, learned, "L_D");

  const auto main = trainer.main_side_parameters();
  const auto disc = trainer.discriminator_side_parameters();
  auto& net = *trainer.net();
  std::vector<torch::Tensor> unused;
  if (!f.use_feat)
    for (auto id : {DiscriminatorId::Fs, DiscriminatorId::Ft}) {
      auto p = net.discriminator_parameters(id);
      unused.insert(unused.end(), p.begin(), p.end());
    }
  if (!f.use_att)
    for (auto id : {DiscriminatorId::As, DiscriminatorId::At}) {
      auto p = net.discriminator_parameters(id);
      unused.insert(unused.end(), p.begin(), p.end());
    }

  for (const auto& p : disc)
    if (!p.requires_grad()) fail("discriminator parameter left frozen after graph construction");

  // Phase B objective: no discriminator gradient.
  clear_grads(main);
  clear_grads(disc);
  g.main_objective(c.weights).backward({}, /*retain_graph=*/true);
  if (!all_zero_grads(disc)) fail("main objective reached discriminator parameters");
  if (!any_nonzero_grad(main)) fail("main objective produced no extractor gradient");
  const bool target_grad = tgt.images.grad().defined() && tgt.images.grad().abs().sum().item<double>() != 0.0;
  if (!f.use_translator && target_grad) fail("target batch influenced a non-adaptive method");

  // Phase A objective: no main-side gradient.
  clear_grads(main);
  clear_grads(disc);
  if (auto d = g.discriminator_objective(c.weights); d.defined()) {
    d.backward();
    if (!all_zero_grads(main)) fail("discriminator objective reached main-side parameters");
    if (!any_nonzero_grad(disc)) fail("discriminator objective produced no discriminator gradient");
  } else if (f.use_feat || f.use_att || learned) {
    fail("discriminator objective missing");
  }
  if (!all_zero_grads(unused)) fail("ablated discriminator received gradient");
  clear_grads(main);
  clear_grads(disc);

  // A real step: verify_phases asserts cross-phase parameters stay bitwise
  // unchanged; ablated discriminators must not move at all.
  std::vector<torch::Tensor> before;
  for (const auto& p : unused) before.push_back(p.detach().clone());
  try {
    tgt.images = tgt.images.detach();
    trainer.train_step(src, &tgt);
  } catch (const std::exception& e) {
    fail(e.what());
  }
  for (std::size_t i = 0; i < unused.size(); ++i)
    if (!torch::equal(before[i], unused[i].detach())) fail("ablated discriminator parameter changed");
  return errors;
}

}  // namespace daan::test
