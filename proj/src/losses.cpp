#include "daan/losses.hpp"

#include <cmath>
#include <cstdio>

#include "daan/error.hpp"

namespace daan {

const char* term_name(Term t) {
  static constexpr const char* names[kTermCount] = {
      "Lc_s",           "Lc_s2t",         "L_lab_consis",   "L_G",          "L_D",         "L_feat_consis_s",
      "L_feat_consis_t", "L_feat_adv_s",  "L_feat_adv_t",   "L_att_consis_s", "L_att_consis_t", "L_att_adv_s",
      "L_att_adv_t",    "L_inter",        "L_intra",        "L_total"};
  return names[static_cast<std::size_t>(t)];
}

double LossReport::get(Term t) const {
  const auto& v = values_[static_cast<std::size_t>(t)];
  if (!v) throw Error(std::string("loss term ") + term_name(t) + " missing from report");
  return *v;
}

void LossReport::finalize() {
  auto val = [&](Term t) { return has(t) ? get(t) : 0.0; };
  (void)get(Term::Lc_s);
  for (std::size_t i = 0; i < static_cast<std::size_t>(Term::L_inter); ++i)
    if (!values_[i]) values_[i] = 0.0;
  set(Term::L_inter, inter_domain_loss(val(Term::L_G), val(Term::L_D), val(Term::L_lab_consis), weights));
  IntraTerms<double> it{val(Term::L_feat_consis_s), val(Term::L_feat_consis_t), val(Term::L_feat_adv_s),
                        val(Term::L_feat_adv_t),    val(Term::L_att_consis_s),  val(Term::L_att_consis_t),
                        val(Term::L_att_adv_s),     val(Term::L_att_adv_t)};
  set(Term::L_intra, intra_domain_loss(it, weights));
  set(Term::L_total, total_loss(*this));
}

void LossReport::check_finite() const {
  for (std::size_t i = 0; i < kTermCount; ++i)
    if (values_[i] && !std::isfinite(*values_[i])) throw NonFiniteLoss(term_name(static_cast<Term>(i)));
}

std::string LossReport::csv_header() {
  std::string h = "step,lr";
  for (std::size_t i = 0; i < kTermCount; ++i) {
    h += ',';
    h += term_name(static_cast<Term>(i));
  }
  h += ",lambda_G,lambda_D,lambda_l,lambda_f,lambda_a";
  return h;
}

std::string LossReport::csv_row() const {
  char buf[64];
  std::string r = std::to_string(step);
  std::snprintf(buf, sizeof buf, ",%.9g", learning_rate);
  r += buf;
  for (std::size_t i = 0; i < kTermCount; ++i) {
    if (values_[i]) {
      std::snprintf(buf, sizeof buf, ",%.9g", *values_[i]);
      r += buf;
    } else {
      r += ',';
    }
  }
  for (double w : {weights.G, weights.D, weights.l, weights.f, weights.a}) {
    std::snprintf(buf, sizeof buf, ",%.9g", w);
    r += buf;
  }
  return r;
}

namespace {

void check_scores(const torch::Tensor& s, const char* what) {
  const auto d = s.detach();
  if (!torch::isfinite(d).all().item<bool>() || (d < 0).any().item<bool>() || (d > 1).any().item<bool>())
    throw Error(std::string(what) + ": scores must lie in (0,1)");
}

}  // namespace

torch::Tensor task_loss(const GroupLogits& logits, const torch::Tensor& targets) {
  if (!logits.multitask) throw Error("task_loss needs grouped logits; use flat_task_loss");
  if (targets.dim() != 2 || targets.size(1) != static_cast<std::int64_t>(logits.logits.size()))
    throw ShapeError("task_loss: targets must be [B, groups]");
  torch::Tensor total;
  for (std::size_t g = 0; g < logits.logits.size(); ++g) {
    const auto& l = logits.logits[g];
    const auto t = targets.select(1, static_cast<std::int64_t>(g));
    if ((t < 0).any().item<bool>() || (t >= l.size(1)).any().item<bool>())
      throw Error("task_loss: target index out of range in group " + std::to_string(g));
    auto ce = torch::nn::functional::cross_entropy(l, t);
    total = total.defined() ? total + ce : ce;
  }
  return total;
}

torch::Tensor flat_task_loss(const GroupLogits& logits, const torch::Tensor& binary) {
  if (logits.multitask || logits.logits.size() != 1) throw Error("flat_task_loss needs a flat head");
  const auto& l = logits.logits.front();
  if (binary.sizes() != l.sizes()) throw ShapeError("flat_task_loss: label shape mismatch");
  return torch::nn::functional::binary_cross_entropy_with_logits(
             l, binary.to(l.dtype()), torch::nn::functional::BinaryCrossEntropyWithLogitsFuncOptions().reduction(torch::kNone))
      .sum(1)
      .mean();
}

torch::Tensor label_consistency(const torch::Tensor& pred_t, const torch::Tensor& pred_t2s) {
  if (pred_t.sizes() != pred_t2s.sizes() || pred_t.dim() != 2)
    throw ShapeError("label_consistency: prediction shapes differ");
  return torch::linalg_vector_norm(pred_t - pred_t2s, 2, {1}).mean();
}

torch::Tensor consistency_adversarial(const torch::Tensor& score) {
  check_scores(score, "consistency_adversarial");
  return -torch::log(score.clamp(kScoreEps, 1.0 - kScoreEps)).mean();
}

torch::Tensor discriminator_adversarial(const torch::Tensor& score_real, const torch::Tensor& score_fake) {
  check_scores(score_real, "discriminator_adversarial");
  check_scores(score_fake, "discriminator_adversarial");
  const auto real = torch::log(score_real.clamp(kScoreEps, 1.0 - kScoreEps)).mean();
  const auto fake = torch::log(1.0 - score_fake.clamp(kScoreEps, 1.0 - kScoreEps)).mean();
  return -0.5 * (real + fake);
}

double total_loss(const LossReport& r) {
  return r.get(Term::Lc_s) + r.get(Term::Lc_s2t) + r.get(Term::L_inter) + r.get(Term::L_intra);
}

}  // namespace daan
