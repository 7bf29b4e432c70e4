// Loss terms of the adaptation objective and the per-step LossReport.
//
// Adversarial terms are binary cross-entropies averaged per score-map
// location. Scores are clamped to [1e-7, 1 - 1e-7] before the log.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "daan/model.hpp"

namespace daan {

inline constexpr double kScoreEps = 1e-7;

/// Loss weights. λ_G and λ_D weight the translator losses; λ_l the
/// label-consistency term; λ_f and λ_a the feature and attention
/// consistency (extractor-side) terms.
struct LossWeights {
  double G = 1.0;
  double D = 1.0;
  double l = 0.02;
  double f = 0.1;
  double a = 0.1;

  bool operator==(const LossWeights&) const = default;
};

enum class Term : int {
  Lc_s,
  Lc_s2t,
  L_lab_consis,
  L_G,
  L_D,
  L_feat_consis_s,
  L_feat_consis_t,
  L_feat_adv_s,
  L_feat_adv_t,
  L_att_consis_s,
  L_att_consis_t,
  L_att_adv_s,
  L_att_adv_t,
  L_inter,
  L_intra,
  L_total,
};
inline constexpr std::size_t kTermCount = 16;
const char* term_name(Term t);

class LossReport {
 public:
  LossReport() = default;
  explicit LossReport(LossWeights w) : weights(w) {}

  void set(Term t, double v) { values_[static_cast<std::size_t>(t)] = v; }
  bool has(Term t) const { return values_[static_cast<std::size_t>(t)].has_value(); }
  /// Throws Error when the term was never set.
  double get(Term t) const;

  /// Computes L_inter, L_intra and L_total from the component terms. Terms
  /// not set are treated as 0 (ablated); Lc_s must be present.
  void finalize();
  /// Throws NonFiniteLoss naming the first non-finite term.
  void check_finite() const;

  LossWeights weights;
  std::int64_t step = 0;
  double learning_rate = 0.0;
  /// Set when translator losses were requested from a non-learned translator.
  bool translator_losses_inactive = false;

  static std::string csv_header();
  std::string csv_row() const;

  bool operator==(const LossReport& o) const {
    return values_ == o.values_ && weights == o.weights && step == o.step && learning_rate == o.learning_rate;
  }

 private:
  std::array<std::optional<double>, kTermCount> values_{};
};

/// Mean over the batch of the summed per-group softmax cross-entropy.
/// `targets` is [B,G] int64.
torch::Tensor task_loss(const GroupLogits& logits, const torch::Tensor& targets);
/// Flat-head variant: mean over the batch of summed per-attribute sigmoid
/// BCE against binary labels [B,N].
torch::Tensor flat_task_loss(const GroupLogits& logits, const torch::Tensor& binary);

/// Mean over the batch of ||p_t - p_t2s||_2 on concatenated probabilities.
torch::Tensor label_consistency(const torch::Tensor& pred_t, const torch::Tensor& pred_t2s);

/// Extractor-side fooling term: -mean log(score).
torch::Tensor consistency_adversarial(const torch::Tensor& score);

/// Discriminator term: -1/2 [mean log(real) + mean log(1 - fake)].
torch::Tensor discriminator_adversarial(const torch::Tensor& score_real, const torch::Tensor& score_fake);

/// L_inter = λ_G L_G + λ_D L_D + λ_l L_lab.
template <class T>
T inter_domain_loss(const T& l_g, const T& l_d, const T& l_lab, const LossWeights& w) {
  return w.G * l_g + w.D * l_d + w.l * l_lab;
}

template <class T>
struct IntraTerms {
  T feat_consis_s, feat_consis_t, feat_adv_s, feat_adv_t;
  T att_consis_s, att_consis_t, att_adv_s, att_adv_t;
};

/// L_intra = λ_f (feat consis s + t) + feat adv s + t
///         + λ_a (att consis s + t) + att adv s + t.
template <class T>
T intra_domain_loss(const IntraTerms<T>& t, const LossWeights& w) {
  return w.f * (t.feat_consis_s + t.feat_consis_t) + t.feat_adv_s + t.feat_adv_t +
         w.a * (t.att_consis_s + t.att_consis_t) + t.att_adv_s + t.att_adv_t;
}

/// Lc_s + Lc_s2t + L_inter + L_intra from a report. Throws Error if any of
/// the four is missing.
double total_loss(const LossReport& report);

}  // namespace daan
