#include "daan/dataset.hpp"

#include <filesystem>
#include <map>
#include <sstream>

#include "daan/error.hpp"
#include "daan/image_io.hpp"
#include "daan/text.hpp"

namespace fs = std::filesystem;

namespace daan {

std::string to_string(Domain d) { return d == Domain::source ? "source" : "target"; }

void Dataset::add(Sample sample) {
  if (sample.domain != domain_)
    throw Error("sample '" + sample.id + "' is " + to_string(sample.domain) + ", dataset is " +
                to_string(domain_));
  if (sample.id.empty()) throw Error("sample id must be non-empty");
  if (index_.count(sample.id)) throw Error("duplicate sample id '" + sample.id + "'");
  if (!samples_.empty() && !samples_.front().image.same_shape(sample.image))
    throw ShapeError("sample '" + sample.id + "' image shape differs from the dataset's");
  if (domain_ == Domain::source && !sample.labels)
    throw Error("source sample '" + sample.id + "' has no labels");
  if (sample.labels) (void)schema_.group_targets(*sample.labels);
  index_.emplace(sample.id, samples_.size());
  samples_.push_back(std::move(sample));
}

bool Dataset::fully_labeled() const {
  for (const auto& s : samples_)
    if (!s.labels) return false;
  return true;
}

std::optional<std::size_t> Dataset::find(const std::string& id) const {
  if (auto it = index_.find(id); it != index_.end()) return it->second;
  return std::nullopt;
}

LabelVector majority_vote(std::span<const LabelVector> votes) {
  if (votes.size() < 3)
    throw Error("majority vote needs at least 3 votes, got " + std::to_string(votes.size()));
  const std::size_t n = votes.front().size();
  std::vector<std::size_t> ones(n, 0);
  for (const auto& v : votes) {
    if (v.size() != n) throw ShapeError("vote vectors differ in length");
    for (std::size_t i = 0; i < n; ++i) ones[i] += v[i] ? 1 : 0;
  }
  LabelVector out(n, 0);
  for (std::size_t i = 0; i < n; ++i) out[i] = 2 * ones[i] > votes.size() ? 1 : 0;
  return out;
}

std::string manifest_header(const AttributeSchema& schema) {
  std::string h = "id,path";
  for (const auto& a : schema.attributes()) h += ",label_" + a;
  return h;
}

namespace {

std::vector<std::string> expected_label_columns(const AttributeSchema& schema) {
  std::vector<std::string> cols;
  for (const auto& a : schema.attributes()) cols.push_back("label_" + a);
  return cols;
}

void check_header(const std::string& file, std::string_view line, const AttributeSchema& schema,
                  std::string_view second) {
  auto cells = split(line, ',');
  const auto labels = expected_label_columns(schema);
  bool ok = cells.size() == labels.size() + 2 && trim(cells[0]) == "id" && trim(cells[1]) == second;
  for (std::size_t i = 0; ok && i < labels.size(); ++i) ok = trim(cells[i + 2]) == labels[i];
  if (!ok)
    throw FormatError(file, 1, "header does not match schema; expected 'id," + std::string(second) + "," +
                                   join(labels, ",") + "'");
}

/// Parses N label cells; returns nullopt when every cell is empty.
std::optional<LabelVector> parse_label_cells(const std::string& file, int row,
                                             std::span<const std::string_view> cells) {
  LabelVector v;
  int empty = 0;
  for (auto c : cells) {
    const auto t = trim(c);
    if (t.empty()) {
      ++empty;
      v.push_back(0);
    } else if (t == "0" || t == "1") {
      v.push_back(t == "1" ? 1 : 0);
    } else {
      throw FormatError(file, row, "non-binary label token '" + std::string(t) + "'");
    }
  }
  if (empty == static_cast<int>(cells.size())) return std::nullopt;
  if (empty > 0) throw FormatError(file, row, "row has " + std::to_string(empty) + " missing label cells");
  return v;
}

}  // namespace

Dataset load_manifest(const std::string& path, const AttributeSchema& schema, Domain domain, Split split) {
  const std::string text = read_text_file(path);
  const auto lines = split_lines(text);
  if (lines.empty()) throw FormatError(path, 1, "empty manifest");
  check_header(path, lines[0], schema, "path");

  const fs::path base = fs::path(path).parent_path();
  const std::size_t n = schema.num_attributes();
  Dataset ds(schema, domain, split);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const int row = static_cast<int>(r) + 1;
    if (trim(lines[r]).empty()) continue;
    auto cells = daan::split(lines[r], ',');
    if (cells.size() != n + 2)
      throw FormatError(path, row, "expected " + std::to_string(n + 2) + " columns, got " +
                                       std::to_string(cells.size()));
    Sample s;
    s.id = std::string(trim(cells[0]));
    s.domain = domain;
    s.labels = parse_label_cells(path, row, std::span(cells).subspan(2));
    if (domain == Domain::source && !s.labels) throw FormatError(path, row, "source row has no labels");
    if (s.labels) {
      try {
        (void)schema.group_targets(*s.labels);
      } catch (const MutualExclusionViolation& e) {
        throw FormatError(path, row, "mutual exclusion violated in group '" + e.group() + "'");
      }
    }
    fs::path img = std::string(trim(cells[1]));
    if (img.is_relative()) img = base / img;
    s.image = read_png(img.string());
    try {
      ds.add(std::move(s));
    } catch (const Error& e) {
      throw FormatError(path, row, e.what());
    }
  }
  return ds;
}

void write_manifest(const std::string& manifest_path, const std::string& image_dir, const Dataset& dataset,
                    bool with_labels) {
  const fs::path base = fs::path(manifest_path).parent_path();
  fs::create_directories(image_dir);
  std::ostringstream out;
  out << manifest_header(dataset.schema()) << '\n';
  for (const auto& s : dataset.samples()) {
    const fs::path img = fs::path(image_dir) / (s.id + ".png");
    write_png(img.string(), s.image, 16);
    fs::path rel = base.empty() ? img : fs::relative(img, base);
    if (rel.empty()) rel = img;
    out << s.id << ',' << rel.generic_string();
    for (std::size_t i = 0; i < dataset.schema().num_attributes(); ++i) {
      out << ',';
      if (with_labels && s.labels) out << static_cast<int>((*s.labels)[i]);
    }
    out << '\n';
  }
  write_text_file(manifest_path, out.str());
}

std::vector<std::pair<std::string, LabelVector>> aggregate_votes(const std::string& path,
                                                                 const AttributeSchema& schema) {
  const std::string text = read_text_file(path);
  const auto lines = split_lines(text);
  if (lines.empty()) throw FormatError(path, 1, "empty vote file");
  check_header(path, lines[0], schema, "annotator");

  const std::size_t n = schema.num_attributes();
  std::vector<std::string> order;
  std::map<std::string, std::vector<LabelVector>> votes;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const int row = static_cast<int>(r) + 1;
    if (trim(lines[r]).empty()) continue;
    auto cells = split(lines[r], ',');
    if (cells.size() != n + 2)
      throw FormatError(path, row, "expected " + std::to_string(n + 2) + " columns, got " +
                                       std::to_string(cells.size()));
    std::string id(trim(cells[0]));
    if (id.empty()) throw FormatError(path, row, "empty id");
    auto bits = parse_label_cells(path, row, std::span(cells).subspan(2));
    if (!bits) throw FormatError(path, row, "vote row has no labels");
    auto [it, inserted] = votes.try_emplace(id);
    if (inserted) order.push_back(id);
    it->second.push_back(std::move(*bits));
  }

  std::vector<std::string> short_ids;
  for (const auto& id : order)
    if (votes[id].size() < 3) short_ids.push_back(id + " (" + std::to_string(votes[id].size()) + " votes)");
  if (!short_ids.empty())
    throw FormatError(path, 0, "fewer than 3 votes for: " + join(short_ids, ", "));

  std::vector<std::pair<std::string, LabelVector>> out;
  for (const auto& id : order) {
    LabelVector v = majority_vote(votes[id]);
    try {
      (void)schema.group_targets(v);
    } catch (const MutualExclusionViolation& e) {
      throw FormatError(path, 0, "aggregated labels of '" + id + "' violate group '" + e.group() + "'");
    }
    out.emplace_back(id, std::move(v));
  }
  return out;
}

}  // namespace daan
