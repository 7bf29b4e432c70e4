#include "daan/schema.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "daan/error.hpp"
#include "daan/text.hpp"

namespace daan {

std::string Group::class_name(int cls) const {
  if (implicit_complement) {
    if (cls == 0) return members.front();
    if (cls == 1) return "not_" + members.front();
  } else if (cls >= 0 && cls < static_cast<int>(members.size())) {
    return members[static_cast<std::size_t>(cls)];
  }
  throw Error("class index " + std::to_string(cls) + " out of range for group '" + name + "'");
}

namespace {

bool valid_identifier(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

}  // namespace

AttributeSchema AttributeSchema::from_groups(std::vector<Group> groups) {
  AttributeSchema schema;
  std::map<std::string, std::size_t, std::less<>> seen_group;
  std::map<std::string, std::size_t, std::less<>> seen_attr;
  int offset = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    Group& group = groups[g];
    if (!valid_identifier(group.name)) throw SchemaError(0, "invalid group name '" + group.name + "'");
    if (group.members.empty()) throw SchemaError(0, "group '" + group.name + "' has no attributes");
    if (!seen_group.emplace(group.name, g).second)
      throw SchemaError(0, "duplicate group name '" + group.name + "'");
    group.implicit_complement = group.members.size() == 1;
    std::vector<int> idx;
    for (const auto& attr : group.members) {
      if (!valid_identifier(attr)) throw SchemaError(0, "invalid attribute name '" + attr + "'");
      auto [it, inserted] = seen_attr.emplace(attr, g);
      if (!inserted)
        throw SchemaError(0, "attribute '" + attr + "' listed in group '" + groups[it->second].name +
                                 "' and again in group '" + group.name + "'");
      idx.push_back(static_cast<int>(schema.attributes_.size()));
      schema.attributes_.push_back(attr);
    }
    schema.member_index_.push_back(std::move(idx));
    schema.class_offsets_.push_back(offset);
    offset += group.num_classes();
  }
  schema.groups_ = std::move(groups);
  return schema;
}

AttributeSchema AttributeSchema::parse(std::string_view text) {
  std::vector<Group> groups;
  std::map<std::string, int, std::less<>> attr_line;
  std::map<std::string, int, std::less<>> group_seen;

  int line_no = 0;
  for (std::string_view raw : split_lines(text)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto colon = line.find(':');
    if (colon == std::string_view::npos) throw SchemaError(line_no, "expected 'group: attr, ...'");
    Group group;
    group.name = std::string(trim(line.substr(0, colon)));
    if (!valid_identifier(group.name)) throw SchemaError(line_no, "invalid group name '" + group.name + "'");
    if (auto [it, ok] = group_seen.emplace(group.name, line_no); !ok)
      throw SchemaError(line_no, "duplicate group '" + group.name + "' (first at line " +
                                     std::to_string(it->second) + ")");

    std::string_view rest = trim(line.substr(colon + 1));
    if (rest.empty()) throw SchemaError(line_no, "group '" + group.name + "' is empty");
    for (std::string_view tok : split(rest, ',')) {
      std::string attr(trim(tok));
      if (!valid_identifier(attr)) throw SchemaError(line_no, "invalid attribute name '" + attr + "'");
      if (auto it = attr_line.find(attr); it != attr_line.end()) {
        if (it->second == line_no)
          throw SchemaError(line_no, "duplicate attribute '" + attr + "' in group '" + group.name + "'");
        throw SchemaError(line_no, "attribute '" + attr + "' appears in two groups (lines " +
                                       std::to_string(it->second) + " and " + std::to_string(line_no) + ")");
      }
      attr_line.emplace(attr, line_no);
      group.members.push_back(std::move(attr));
    }
    groups.push_back(std::move(group));
  }
  if (groups.empty()) throw SchemaError(0, "schema defines no groups");
  return from_groups(std::move(groups));
}

AttributeSchema AttributeSchema::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open schema file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str());
  } catch (const SchemaError& e) {
    throw SchemaError(e.line(), path + ": " + e.what());
  }
}

std::string AttributeSchema::serialize() const {
  std::string out;
  for (const auto& g : groups_) {
    out += g.name;
    out += ':';
    for (std::size_t i = 0; i < g.members.size(); ++i) {
      out += i == 0 ? " " : ", ";
      out += g.members[i];
    }
    out += '\n';
  }
  return out;
}

std::uint64_t AttributeSchema::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : serialize()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

int AttributeSchema::total_classes() const {
  int n = 0;
  for (const auto& g : groups_) n += g.num_classes();
  return n;
}

int AttributeSchema::attribute_index(std::string_view name) const {
  for (std::size_t i = 0; i < attributes_.size(); ++i)
    if (attributes_[i] == name) return static_cast<int>(i);
  return -1;
}

int AttributeSchema::group_index(std::string_view name) const {
  for (std::size_t i = 0; i < groups_.size(); ++i)
    if (groups_[i].name == name) return static_cast<int>(i);
  return -1;
}

std::vector<int> AttributeSchema::group_targets(std::span<const std::uint8_t> labels) const {
  if (labels.size() != attributes_.size())
    throw ShapeError("label vector has " + std::to_string(labels.size()) + " bits, schema has " +
                     std::to_string(attributes_.size()) + " attributes");
  std::vector<int> out;
  out.reserve(groups_.size());
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    const auto& idx = member_index_[g];
    if (groups_[g].implicit_complement) {
      const auto bit = labels[static_cast<std::size_t>(idx.front())];
      if (bit > 1) throw MutualExclusionViolation(groups_[g].name);
      out.push_back(bit == 1 ? 0 : 1);
      continue;
    }
    int hot = -1;
    for (std::size_t m = 0; m < idx.size(); ++m) {
      const auto bit = labels[static_cast<std::size_t>(idx[m])];
      if (bit > 1) throw MutualExclusionViolation(groups_[g].name);
      if (bit == 1) {
        if (hot >= 0) throw MutualExclusionViolation(groups_[g].name);
        hot = static_cast<int>(m);
      }
    }
    if (hot < 0) throw MutualExclusionViolation(groups_[g].name);
    out.push_back(hot);
  }
  return out;
}

LabelVector AttributeSchema::binary_from_group_argmax(std::span<const int> argmaxes) const {
  if (argmaxes.size() != groups_.size())
    throw ShapeError("expected " + std::to_string(groups_.size()) + " group indices, got " +
                     std::to_string(argmaxes.size()));
  LabelVector out(attributes_.size(), 0);
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    const int cls = argmaxes[g];
    if (cls < 0 || cls >= groups_[g].num_classes())
      throw Error("class index " + std::to_string(cls) + " out of range for group '" + groups_[g].name + "'");
    const auto& idx = member_index_[g];
    if (groups_[g].implicit_complement) {
      out[static_cast<std::size_t>(idx.front())] = cls == 0 ? 1 : 0;
    } else {
      out[static_cast<std::size_t>(idx[static_cast<std::size_t>(cls)])] = 1;
    }
  }
  return out;
}

bool AttributeSchema::is_valid(std::span<const std::uint8_t> labels) const {
  try {
    (void)group_targets(labels);
    return true;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace daan
