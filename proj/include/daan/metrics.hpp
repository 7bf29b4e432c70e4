// Per-attribute confusion counts, accuracy / precision / recall / F1 and
// their macro averages. Zero denominators give 0 for precision, recall
// and F1.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "daan/dataset.hpp"
#include "daan/model.hpp"
#include "daan/schema.hpp"

namespace daan {

struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
  double accuracy() const;
  double precision() const;
  double recall() const;
  double f1() const;

  ConfusionCounts& operator+=(const ConfusionCounts& o);
  bool operator==(const ConfusionCounts&) const = default;
};

struct AttributeMetrics {
  std::vector<std::string> attributes;
  std::vector<ConfusionCounts> counts;
  double avg_acc = 0.0;
  double avg_f1 = 0.0;

  std::size_t size() const { return attributes.size(); }
  /// Adds the counts of another shard over the same attributes.
  void merge(const AttributeMetrics& other);
};

/// Confusion counts per attribute of `predictions` against `labels`,
/// both [samples][N] binary.
AttributeMetrics compute_metrics(const std::vector<std::string>& attributes,
                                 const std::vector<LabelVector>& predictions,
                                 const std::vector<LabelVector>& labels);

/// Unweighted mean accuracy and F1 over attributes.
std::pair<double, double> macro_average(const std::vector<ConfusionCounts>& counts);

/// Binary predictions of `net` for a batch [B,C,H,W]: per-group argmax then
/// binary_from_group_argmax (grouped heads) or sigmoid > 0.5 (flat head).
std::vector<LabelVector> predict(DaanNetImpl& net, const AttributeSchema& schema, const torch::Tensor& images);

/// Evaluates `net` on a labeled dataset. Throws Error if any sample lacks
/// labels or the dataset schema differs from `schema`.
AttributeMetrics evaluate(DaanNetImpl& net, const AttributeSchema& schema, const Dataset& dataset,
                          int batch_size = 100);

/// Per-group accuracy of the argmax prediction (grouped heads only).
std::vector<double> group_accuracy(DaanNetImpl& net, const AttributeSchema& schema, const Dataset& dataset,
                                   int batch_size = 100);

enum class ReportFormat { csv, table };

/// One row per attribute in schema order, then a MACRO row.
std::string render_report(const AttributeMetrics& metrics, ReportFormat format);

/// Published full-scale reference points (avg acc, avg F1).
struct ReferencePoint {
  const char* name;
  double avg_acc;
  double avg_f1;
};
inline constexpr ReferencePoint kReferenceSourceOnly{"Source Only", 0.8054, 0.6770};
inline constexpr ReferencePoint kReferenceDaanLfa{"DAAN-LFA", 0.8239, 0.7215};
inline constexpr ReferencePoint kReferenceTargetOnlyMultiTask{"Target Only(MultiTask)", 0.8526, 0.7601};

}  // namespace daan
