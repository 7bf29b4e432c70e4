// Attribute vocabulary partitioned into mutually exclusive groups.
//
// Schema file format, one group per line:
//
//   # comment
//   age: young, middleAged, old
//   bald: bald
//
// Attribute order in the file defines the index of each bit in the
// N-length binary label vector. A group listing a single attribute gets an
// implicit complement class "not_<attr>" so every softmax head has at
// least two classes.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace daan {

using LabelVector = std::vector<std::uint8_t>;

struct Group {
  std::string name;
  std::vector<std::string> members;
  bool implicit_complement = false;

  int num_classes() const {
    return implicit_complement ? 2 : static_cast<int>(members.size());
  }
  /// Class name for a head output index: a member, or "not_<attr>".
  std::string class_name(int cls) const;
};

class AttributeSchema {
 public:
  AttributeSchema() = default;

  /// Builds a schema from explicit groups; `implicit_complement` is derived
  /// from member count. Throws SchemaError on any partition violation.
  static AttributeSchema from_groups(std::vector<Group> groups);
  static AttributeSchema parse(std::string_view text);
  static AttributeSchema load(const std::string& path);

  /// Canonical text form; parse(serialize()) reproduces the schema.
  std::string serialize() const;
  /// FNV-1a hash of the canonical text.
  std::uint64_t hash() const;

  const std::vector<std::string>& attributes() const { return attributes_; }
  const std::vector<Group>& groups() const { return groups_; }
  std::size_t num_attributes() const { return attributes_.size(); }
  std::size_t num_groups() const { return groups_.size(); }
  /// Sum of class counts over all groups (channels of an attention stack).
  int total_classes() const;
  /// Offset of group `g`'s first class in a concatenation of all group outputs.
  int class_offset(std::size_t g) const { return class_offsets_.at(g); }
  /// Index of an attribute in the binary label vector, or -1.
  int attribute_index(std::string_view name) const;
  /// Index of a group by name, or -1.
  int group_index(std::string_view name) const;

  /// Per-group class index from a binary label vector.
  /// Throws MutualExclusionViolation naming the offending group.
  std::vector<int> group_targets(std::span<const std::uint8_t> labels) const;
  /// Binary label vector from one class index per group.
  LabelVector binary_from_group_argmax(std::span<const int> argmaxes) const;
  /// True iff `labels` has length N and satisfies every group constraint.
  bool is_valid(std::span<const std::uint8_t> labels) const;

  bool operator==(const AttributeSchema& other) const {
    return attributes_ == other.attributes_ && serialize() == other.serialize();
  }

 private:
  std::vector<std::string> attributes_;
  std::vector<Group> groups_;
  std::vector<std::vector<int>> member_index_;  // per group, attribute indices
  std::vector<int> class_offsets_;
};

}  // namespace daan
