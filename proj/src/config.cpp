#include "daan/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <functional>
#include <map>

#include "daan/error.hpp"
#include "daan/text.hpp"

namespace daan {

KeyValueConfig KeyValueConfig::parse(std::string_view text, const std::string& source_name) {
  KeyValueConfig kv;
  kv.source_ = source_name;
  int line_no = 0;
  for (std::string_view raw : split_lines(text)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw FormatError(source_name, line_no, "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw FormatError(source_name, line_no, "empty key");
    if (kv.get(key)) throw FormatError(source_name, line_no, "duplicate key '" + key + "'");
    kv.entries_.emplace_back(key, value);
  }
  return kv;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) { return parse(read_text_file(path), path); }

std::optional<std::string> KeyValueConfig::get(std::string_view key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  return std::nullopt;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_)
    if (k == key) {
      v = value;
      return;
    }
  entries_.emplace_back(key, value);
}

bool parse_bool(std::string_view v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw Error("expected on/off, got '" + std::string(v) + "'");
}

namespace {

template <class T>
T parse_number(std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw Error("invalid number '" + std::string(v) + "'");
  return out;
}

std::vector<int> parse_int_list(std::string_view v) {
  std::vector<int> out;
  for (auto tok : split(v, ',')) out.push_back(parse_number<int>(trim(tok)));
  return out;
}

std::string fmt_double(double d) {
  char buf[40];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, end);
}

std::string fmt_list(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

using Setter = std::function<void(const std::string&)>;

void apply(const KeyValueConfig& kv, const std::map<std::string, Setter, std::less<>>& setters,
           std::initializer_list<std::string_view> extra_keys) {
  for (const auto& [key, value] : kv.entries()) {
    auto it = setters.find(key);
    if (it == setters.end()) {
      if (std::find(extra_keys.begin(), extra_keys.end(), key) != extra_keys.end()) continue;
      throw FormatError(kv.source(), 0, "unknown key '" + key + "'");
    }
    try {
      it->second(value);
    } catch (const FormatError&) {
      throw;
    } catch (const Error& e) {
      throw FormatError(kv.source(), 0, key + ": " + e.what());
    }
  }
}

}  // namespace

void apply_train_config(const KeyValueConfig& kv, TrainConfig& c, std::initializer_list<std::string_view> extra_keys) {
  const std::map<std::string, Setter, std::less<>> setters = {
      {"batch_size", [&](const std::string& v) { c.batch_size = parse_number<int>(v); }},
      {"lr", [&](const std::string& v) { c.lr = parse_number<double>(v); }},
      {"momentum", [&](const std::string& v) { c.momentum = parse_number<double>(v); }},
      {"weight_decay", [&](const std::string& v) { c.weight_decay = parse_number<double>(v); }},
      {"poly_power", [&](const std::string& v) { c.poly_power = parse_number<double>(v); }},
      {"disc_lr", [&](const std::string& v) { c.disc_lr = parse_number<double>(v); }},
      {"adam_beta1", [&](const std::string& v) { c.adam_beta1 = parse_number<double>(v); }},
      {"adam_beta2", [&](const std::string& v) { c.adam_beta2 = parse_number<double>(v); }},
      {"translator_lr", [&](const std::string& v) { c.translator_lr = parse_number<double>(v); }},
      {"lambda_G", [&](const std::string& v) { c.weights.G = parse_number<double>(v); }},
      {"lambda_D", [&](const std::string& v) { c.weights.D = parse_number<double>(v); }},
      {"lambda_l", [&](const std::string& v) { c.weights.l = parse_number<double>(v); }},
      {"lambda_f", [&](const std::string& v) { c.weights.f = parse_number<double>(v); }},
      {"lambda_a", [&](const std::string& v) { c.weights.a = parse_number<double>(v); }},
      {"total_steps", [&](const std::string& v) { c.total_steps = parse_number<std::int64_t>(v); }},
      {"seed", [&](const std::string& v) { c.seed = parse_number<std::uint64_t>(v); }},
      {"method", [&](const std::string& v) { c.method = method_from_string(v); }},
      {"translator", [&](const std::string& v) { c.translator = translator_mode_from_string(v); }},
      {"checkpoint_every", [&](const std::string& v) { c.checkpoint_every = parse_number<std::int64_t>(v); }},
      {"verify_phases", [&](const std::string& v) { c.verify_phases = parse_bool(v); }},
      {"backbone", [&](const std::string& v) { c.model.backbone = backbone_from_string(v); }},
      {"in_channels", [&](const std::string& v) { c.model.in_channels = parse_number<int>(v); }},
      {"image_size", [&](const std::string& v) { c.model.image_size = parse_number<int>(v); }},
      {"cnn_widths", [&](const std::string& v) { c.model.cnn_widths = parse_int_list(v); }},
      {"cnn_pooled_blocks", [&](const std::string& v) { c.model.cnn_pooled_blocks = parse_number<int>(v); }},
      {"disc_widths", [&](const std::string& v) { c.model.disc_widths = parse_int_list(v); }},
      {"leaky_slope", [&](const std::string& v) { c.model.leaky_slope = parse_number<double>(v); }},
      {"multitask", [&](const std::string& v) { c.model.multitask = parse_bool(v); }},
  };
  apply(kv, setters, extra_keys);
}

std::string to_config_text(const TrainConfig& c) {
  std::string s;
  auto line = [&](const char* k, const std::string& v) { s += std::string(k) + " = " + v + "\n"; };
  line("batch_size", std::to_string(c.batch_size));
  line("lr", fmt_double(c.lr));
  line("momentum", fmt_double(c.momentum));
  line("weight_decay", fmt_double(c.weight_decay));
  line("poly_power", fmt_double(c.poly_power));
  line("disc_lr", fmt_double(c.disc_lr));
  line("adam_beta1", fmt_double(c.adam_beta1));
  line("adam_beta2", fmt_double(c.adam_beta2));
  line("translator_lr", fmt_double(c.translator_lr));
  line("lambda_G", fmt_double(c.weights.G));
  line("lambda_D", fmt_double(c.weights.D));
  line("lambda_l", fmt_double(c.weights.l));
  line("lambda_f", fmt_double(c.weights.f));
  line("lambda_a", fmt_double(c.weights.a));
  line("total_steps", std::to_string(c.total_steps));
  line("seed", std::to_string(c.seed));
  line("method", to_string(c.method));
  line("translator", to_string(c.translator));
  line("checkpoint_every", std::to_string(c.checkpoint_every));
  line("verify_phases", c.verify_phases ? "on" : "off");
  line("backbone", to_string(c.model.backbone));
  line("in_channels", std::to_string(c.model.in_channels));
  line("image_size", std::to_string(c.model.image_size));
  line("cnn_widths", fmt_list(c.model.cnn_widths));
  line("cnn_pooled_blocks", std::to_string(c.model.cnn_pooled_blocks));
  line("disc_widths", fmt_list(c.model.disc_widths));
  line("leaky_slope", fmt_double(c.model.leaky_slope));
  line("multitask", c.model.multitask ? "on" : "off");
  return s;
}

void apply_synth_config(const KeyValueConfig& kv, SynthConfig& c, std::initializer_list<std::string_view> extra_keys) {
  auto bind = [&](Factor f, const std::string& group) {
    for (auto& [factor, name] : c.group_spec.bindings)
      if (factor == f) {
        name = group;
        return;
      }
    c.group_spec.bindings.emplace_back(f, group);
  };
  const std::map<std::string, Setter, std::less<>> setters = {
      {"image_size", [&](const std::string& v) { c.image_size = parse_number<int>(v); }},
      {"channels", [&](const std::string& v) { c.channels = parse_number<int>(v); }},
      {"n_per_domain", [&](const std::string& v) { c.n_per_domain = parse_number<int>(v); }},
      {"style_gap", [&](const std::string& v) { c.style_gap = parse_number<double>(v); }},
      {"seed", [&](const std::string& v) { c.seed = parse_number<std::uint64_t>(v); }},
      {"id_prefix", [&](const std::string& v) { c.id_prefix = v; }},
      {"group.shape", [&](const std::string& v) { bind(Factor::shape, v); }},
      {"group.size", [&](const std::string& v) { bind(Factor::size, v); }},
      {"group.shade", [&](const std::string& v) { bind(Factor::shade, v); }},
  };
  apply(kv, setters, extra_keys);
}

std::string to_config_text(const SynthConfig& c) {
  std::string s;
  s += "image_size = " + std::to_string(c.image_size) + "\n";
  s += "channels = " + std::to_string(c.channels) + "\n";
  s += "n_per_domain = " + std::to_string(c.n_per_domain) + "\n";
  s += "style_gap = " + fmt_double(c.style_gap) + "\n";
  s += "seed = " + std::to_string(c.seed) + "\n";
  s += "id_prefix = " + c.id_prefix + "\n";
  for (const auto& [f, name] : c.group_spec.bindings) s += "group." + to_string(f) + " = " + name + "\n";
  return s;
}

}  // namespace daan
