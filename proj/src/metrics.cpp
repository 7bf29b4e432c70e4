#include "daan/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include "daan/batches.hpp"
#include "daan/error.hpp"

namespace daan {

namespace {
double ratio(std::int64_t num, std::int64_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; }
}  // namespace

double ConfusionCounts::accuracy() const { return ratio(tp + tn, total()); }
double ConfusionCounts::precision() const { return ratio(tp, tp + fp); }
double ConfusionCounts::recall() const { return ratio(tp, tp + fn); }
double ConfusionCounts::f1() const {
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

void AttributeMetrics::merge(const AttributeMetrics& other) {
  if (other.attributes != attributes) throw Error("cannot merge metrics over different attributes");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  std::tie(avg_acc, avg_f1) = macro_average(counts);
}

AttributeMetrics compute_metrics(const std::vector<std::string>& attributes,
                                 const std::vector<LabelVector>& predictions,
                                 const std::vector<LabelVector>& labels) {
  if (predictions.size() != labels.size())
    throw ShapeError("predictions and labels differ in sample count");
  const std::size_t n = attributes.size();
  AttributeMetrics m;
  m.attributes = attributes;
  m.counts.assign(n, {});
  for (std::size_t s = 0; s < labels.size(); ++s) {
    if (predictions[s].size() != n || labels[s].size() != n)
      throw ShapeError("sample " + std::to_string(s) + " has the wrong number of attributes");
    for (std::size_t a = 0; a < n; ++a) {
      const bool p = predictions[s][a] != 0, y = labels[s][a] != 0;
      auto& c = m.counts[a];
      if (p && y) ++c.tp;
      else if (p) ++c.fp;
      else if (y) ++c.fn;
      else ++c.tn;
    }
  }
  std::tie(m.avg_acc, m.avg_f1) = macro_average(m.counts);
  return m;
}

std::pair<double, double> macro_average(const std::vector<ConfusionCounts>& counts) {
  if (counts.empty()) return {0.0, 0.0};
  double acc = 0.0, f1 = 0.0;
  for (const auto& c : counts) {
    acc += c.accuracy();
    f1 += c.f1();
  }
  return {acc / counts.size(), f1 / counts.size()};
}

std::vector<LabelVector> predict(DaanNetImpl& net, const AttributeSchema& schema, const torch::Tensor& images) {
  torch::NoGradGuard no_grad;
  const GroupLogits logits = net.classify(net.extract_features(images).pooled);
  const auto batch = images.size(0);
  std::vector<LabelVector> out;
  out.reserve(batch);
  if (logits.multitask) {
    const torch::Tensor arg = logits.group_argmax().to(torch::kInt32).contiguous();
    const auto groups = arg.size(1);
    const int* p = arg.data_ptr<int>();
    for (std::int64_t b = 0; b < batch; ++b)
      out.push_back(schema.binary_from_group_argmax(std::span<const int>(p + b * groups, groups)));
  } else {
    const torch::Tensor bits = (torch::sigmoid(logits.logits.at(0)) > 0.5).to(torch::kUInt8).contiguous();
    const auto n = bits.size(1);
    const std::uint8_t* p = bits.data_ptr<std::uint8_t>();
    for (std::int64_t b = 0; b < batch; ++b) out.emplace_back(p + b * n, p + (b + 1) * n);
  }
  return out;
}

namespace {

void check_labeled(const AttributeSchema& schema, const Dataset& dataset) {
  if (dataset.schema().hash() != schema.hash()) throw Error("dataset schema differs from model schema");
  if (!dataset.fully_labeled()) throw Error("evaluation needs a fully labeled dataset");
}

template <class Fn>
void for_each_batch(const Dataset& dataset, int batch_size, Fn&& fn) {
  if (batch_size <= 0) throw Error("batch_size must be positive");
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(dataset.size(), start + batch_size); ++i) idx.push_back(i);
    fn(gather_images(UnlabeledView(dataset), idx).images, idx);
  }
}

}  // namespace

AttributeMetrics evaluate(DaanNetImpl& net, const AttributeSchema& schema, const Dataset& dataset, int batch_size) {
  check_labeled(schema, dataset);
  std::vector<LabelVector> preds, labels;
  for_each_batch(dataset, batch_size, [&](const torch::Tensor& images, const std::vector<std::size_t>& idx) {
    auto p = predict(net, schema, images);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      preds.push_back(std::move(p[k]));
      labels.push_back(*dataset[idx[k]].labels);
    }
  });
  return compute_metrics(schema.attributes(), preds, labels);
}

std::vector<double> group_accuracy(DaanNetImpl& net, const AttributeSchema& schema, const Dataset& dataset,
                                   int batch_size) {
  check_labeled(schema, dataset);
  if (!net.heads->multitask()) throw Error("group accuracy needs grouped heads");
  const std::size_t groups = schema.groups().size();
  std::vector<std::int64_t> correct(groups, 0);
  for_each_batch(dataset, batch_size, [&](const torch::Tensor& images, const std::vector<std::size_t>& idx) {
    torch::NoGradGuard no_grad;
    const torch::Tensor arg =
        net.classify(net.extract_features(images).pooled).group_argmax().to(torch::kInt64).contiguous();
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto targets = schema.group_targets(*dataset[idx[k]].labels);
      for (std::size_t g = 0; g < groups; ++g)
        if (arg[k][g].item<std::int64_t>() == targets[g]) ++correct[g];
    }
  });
  std::vector<double> out;
  for (auto c : correct) out.push_back(dataset.empty() ? 0.0 : static_cast<double>(c) / dataset.size());
  return out;
}

std::string render_report(const AttributeMetrics& m, ReportFormat format) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  ConfusionCounts sum;
  for (const auto& c : m.counts) sum += c;
  std::string out;
  if (format == ReportFormat::csv) {
    out += "attribute,tp,fp,tn,fn,acc,precision,recall,f1\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto& c = m.counts[i];
      out += m.attributes[i] + "," + std::to_string(c.tp) + "," + std::to_string(c.fp) + "," +
             std::to_string(c.tn) + "," + std::to_string(c.fn) + "," + num(c.accuracy()) + "," +
             num(c.precision()) + "," + num(c.recall()) + "," + num(c.f1()) + "\n";
    }
    double p = 0, r = 0;
    for (const auto& c : m.counts) {
      p += c.precision();
      r += c.recall();
    }
    const double n = m.counts.empty() ? 1.0 : static_cast<double>(m.counts.size());
    out += "MACRO," + std::to_string(sum.tp) + "," + std::to_string(sum.fp) + "," + std::to_string(sum.tn) + "," +
           std::to_string(sum.fn) + "," + num(m.avg_acc) + "," + num(p / n) + "," + num(r / n) + "," +
           num(m.avg_f1) + "\n";
    return out;
  }
  std::size_t name_w = 9;
  for (const auto& a : m.attributes) name_w = std::max(name_w, a.size());
  char buf[256];
  auto row = [&](const std::string& name, const std::string& acc, const std::string& f1) {
    std::snprintf(buf, sizeof buf, "%-*s  %8s  %8s\n", static_cast<int>(name_w), name.c_str(), acc.c_str(),
                  f1.c_str());
    out += buf;
  };
  row("attribute", "acc", "f1");
  for (std::size_t i = 0; i < m.size(); ++i) row(m.attributes[i], num(m.counts[i].accuracy()), num(m.counts[i].f1()));
  row("MACRO", num(m.avg_acc), num(m.avg_f1));
  return out;
}

}  // namespace daan
