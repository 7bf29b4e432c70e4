#include "daan/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "daan/attention.hpp"
#include "daan/batches.hpp"
#include "daan/checkpoint.hpp"
#include "daan/config.hpp"
#include "daan/dataset.hpp"
#include "daan/error.hpp"
#include "daan/image_io.hpp"
#include "daan/metrics.hpp"
#include "daan/synth.hpp"
#include "daan/text.hpp"
#include "daan/trainer.hpp"

namespace fs = std::filesystem;

namespace daan {

namespace {

// File names inside a synth output directory.
constexpr const char* kSchemaFile = "schema.txt";
constexpr const char* kSynthConfigFile = "synth.cfg";
constexpr const char* kSourceTrain = "source_train.csv";
constexpr const char* kTargetTrain = "target_train.csv";
constexpr const char* kSourceTest = "source_test.csv";
constexpr const char* kTargetTest = "target_test.csv";

struct Options {
  std::string config;
  std::string method;
  std::string multitask;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string checkpoint;
  std::string manifest;
  std::vector<std::string> ids;
  std::vector<std::string> classes;
  std::string votes;
  std::string schema;
};

std::string out_root() {
  const char* env = std::getenv(kOutRootEnv);
  return env && *env ? env : "runs";
}

std::string resolve(const std::string& path, const fs::path& base) {
  if (path.empty()) return path;
  const fs::path p(path);
  return (p.is_absolute() || base.empty() ? p : base / p).lexically_normal().string();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("cannot create directory '" + dir.string() + "'");
}

int cmd_synth(const Options& o, std::ostream& out) {
  SynthConfig base;
  int n_test = 500;
  if (!o.config.empty()) {
    const auto kv = KeyValueConfig::load(o.config);
    apply_synth_config(kv, base, {"n_test"});
    if (auto v = kv.get("n_test")) n_test = std::stoi(*v);
  }
  if (o.seed) base.seed = *o.seed;
  base.id_prefix = "train";
  base.split = Split::train;
  base.validate();
  const fs::path dir = o.out.empty() ? fs::path(out_root()) / "synth" : fs::path(o.out);
  ensure_dir(dir);

  const AttributeSchema schema = synth_schema();
  write_text_file((dir / kSchemaFile).string(), schema.serialize());
  write_text_file((dir / kSynthConfigFile).string(), to_config_text(base) + "n_test = " + std::to_string(n_test) + "\n");

  const SynthDomains train = synth_generate(base, schema);
  write_manifest((dir / kSourceTrain).string(), (dir / "images").string(), train.source);
  write_manifest((dir / kTargetTrain).string(), (dir / "images").string(), train.target);
  if (n_test > 0) {
    SynthConfig test = base;
    test.id_prefix = "test";
    test.split = Split::test;
    test.n_per_domain = n_test;
    const SynthDomains t = synth_generate(test, schema);
    write_manifest((dir / kSourceTest).string(), (dir / "images").string(), t.source);
    write_manifest((dir / kTargetTest).string(), (dir / "images").string(), t.target);
  }
  out << "wrote " << dir.string() << "\n";
  return 0;
}

struct TrainInputs {
  TrainConfig config = TrainConfig::desk_scale();
  std::string data_dir;
  std::string source_manifest, target_manifest, schema_file, synth_config, frozen_s2t, frozen_t2s;
};

TrainInputs read_train_inputs(const Options& o) {
  TrainInputs in;
  fs::path base;
  if (!o.config.empty()) {
    const auto kv = KeyValueConfig::load(o.config);
    apply_train_config(kv, in.config,
                       {"data_dir", "source_manifest", "target_manifest", "schema", "synth_config", "frozen_s2t",
                        "frozen_t2s"});
    base = fs::path(o.config).parent_path();
    auto get = [&](const char* key) { return resolve(kv.get(key).value_or(""), base); };
    in.data_dir = get("data_dir");
    in.source_manifest = get("source_manifest");
    in.target_manifest = get("target_manifest");
    in.schema_file = get("schema");
    in.synth_config = get("synth_config");
    in.frozen_s2t = get("frozen_s2t");
    in.frozen_t2s = get("frozen_t2s");
  }
  if (!o.method.empty()) in.config.method = method_from_string(o.method);
  if (!o.multitask.empty()) in.config.model.multitask = parse_bool(o.multitask);
  if (o.seed) in.config.seed = *o.seed;
  if (in.data_dir.empty()) in.data_dir = (fs::path(out_root()) / "synth").string();
  const fs::path d(in.data_dir);
  auto fallback = [&](std::string& field, const char* name) {
    if (field.empty()) field = (d / name).string();
  };
  fallback(in.source_manifest, kSourceTrain);
  fallback(in.target_manifest, kTargetTrain);
  fallback(in.schema_file, kSchemaFile);
  fallback(in.synth_config, kSynthConfigFile);
  in.config.validate();
  return in;
}

int cmd_train(const Options& o, std::ostream& out) {
  const TrainInputs in = read_train_inputs(o);
  const TrainConfig& c = in.config;
  const AttributeSchema schema = AttributeSchema::load(in.schema_file);

  std::optional<SynthConfig> synth;
  if (c.translator == TranslatorMode::analytic) {
    SynthConfig s;
    apply_synth_config(KeyValueConfig::load(in.synth_config), s, {"n_test"});
    synth = s;
  }
  auto translator = make_translator(c, synth ? &*synth : nullptr, in.frozen_s2t, in.frozen_t2s, &schema);

  const fs::path dir = o.out.empty() ? fs::path(out_root()) / (to_string(c.method) + "_seed" + std::to_string(c.seed))
                                     : fs::path(o.out);
  ensure_dir(dir);

  Trainer trainer(c, schema, std::move(translator));
  if (!o.checkpoint.empty()) trainer.load(o.checkpoint);

  FitResult result;
  if (c.method == Method::target_only) {
    const Dataset target = load_manifest(in.target_manifest, schema, Domain::target);
    if (!target.fully_labeled()) throw Error("target_only needs a labeled target manifest");
    result = fit(trainer, target, std::nullopt, dir.string());
  } else {
    const Dataset source = load_manifest(in.source_manifest, schema, Domain::source);
    std::optional<Dataset> target;
    std::optional<UnlabeledView> view;
    if (c.method != Method::source_only) {
      target.emplace(load_manifest(in.target_manifest, schema, Domain::target));
      view.emplace(*target);
    }
    result = fit(trainer, source, view, dir.string());
  }
  out << "checkpoint " << result.checkpoint << "\n";
  return 0;
}

/// Rejects a manifest whose header or neighbouring schema file disagrees
/// with the checkpoint schema.
void check_manifest_schema(const std::string& manifest, const AttributeSchema& schema) {
  const std::string text = read_text_file(manifest);
  const auto lines = split_lines(text);
  const std::string header = lines.empty() ? std::string() : std::string(trim(lines[0]));
  bool ok = header == manifest_header(schema);
  const fs::path neighbour = fs::path(manifest).parent_path() / kSchemaFile;
  if (ok && fs::exists(neighbour)) ok = AttributeSchema::load(neighbour.string()).hash() == schema.hash();
  if (!ok) throw Error("schema mismatch between checkpoint and manifest '" + manifest + "'");
}

int cmd_eval(const Options& o, std::ostream& out) {
  if (o.checkpoint.empty() || o.manifest.empty()) throw Error("eval needs --checkpoint and --manifest");
  LoadedModel model = load_model(o.checkpoint);
  const AttributeSchema& schema = model.meta.schema;
  check_manifest_schema(o.manifest, schema);
  const Dataset data = load_manifest(o.manifest, schema, Domain::target, Split::test);
  const AttributeMetrics m = evaluate(*model.net, schema, data);
  const std::string report_path =
      o.out.empty() ? (fs::path(o.checkpoint).parent_path() / "eval.csv").string() : o.out;
  if (auto parent = fs::path(report_path).parent_path(); !parent.empty()) ensure_dir(parent);
  write_text_file(report_path, render_report(m, ReportFormat::csv));
  char line[128];
  std::snprintf(line, sizeof line, "MACRO acc=%.6f f1=%.6f\n", m.avg_acc, m.avg_f1);
  out << line;
  return 0;
}

int cmd_cam(const Options& o, std::ostream& out) {
  if (o.checkpoint.empty() || o.manifest.empty()) throw Error("cam needs --checkpoint and --manifest");
  if (o.ids.empty() || o.classes.empty()) throw Error("cam needs --ids and --classes");
  LoadedModel model = load_model(o.checkpoint);
  const AttributeSchema& schema = model.meta.schema;
  const auto& index = model.net->heads->class_index();

  std::vector<std::size_t> channels;
  for (const auto& want : o.classes) {
    const auto slash = want.find('/');
    std::vector<std::size_t> hits;
    for (std::size_t k = 0; k < index.size(); ++k) {
      const bool match = slash == std::string::npos
                             ? index[k].second == want
                             : index[k].first == want.substr(0, slash) && index[k].second == want.substr(slash + 1);
      if (match) hits.push_back(k);
    }
    if (hits.size() != 1) {
      std::string valid;
      for (const auto& [g, c] : index) valid += "\n  " + g + "/" + c;
      throw Error((hits.empty() ? "unknown class '" : "ambiguous class '") + want + "'; valid classes:" + valid);
    }
    channels.push_back(hits[0]);
  }

  check_manifest_schema(o.manifest, schema);
  const Dataset data = load_manifest(o.manifest, schema, Domain::target, Split::test);
  std::vector<std::size_t> rows;
  for (const auto& id : o.ids) {
    auto i = data.find(id);
    if (!i) throw Error("unknown sample id '" + id + "'");
    rows.push_back(*i);
  }
  const fs::path dir = o.out.empty() ? fs::path(o.checkpoint).parent_path() / "cam" : fs::path(o.out);
  ensure_dir(dir);

  torch::NoGradGuard no_grad;
  const ImageBatch batch = gather_images(UnlabeledView(data), rows);
  const AttentionStack stack = cam_stack(model.net->extract_features(batch.images), *model.net->heads);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t k : channels) {
      const Image overlay = render_cam(stack.maps[r][static_cast<std::int64_t>(k)], data[rows[r]].image);
      const auto name = cam_file_name(data[rows[r]].id, index[k].first, index[k].second);
      write_png((dir / name).string(), overlay, 8);
      out << (dir / name).string() << "\n";
    }
  return 0;
}

int cmd_votes(const Options& o, std::ostream& out) {
  const AttributeSchema schema = AttributeSchema::load(o.schema);
  const auto rows = aggregate_votes(o.votes, schema);
  std::string text = "id";
  for (const auto& a : schema.attributes()) text += ",label_" + a;
  text += "\n";
  for (const auto& [id, bits] : rows) {
    text += id;
    for (auto b : bits) text += b ? ",1" : ",0";
    text += "\n";
  }
  if (o.out.empty()) {
    out << text;
  } else {
    write_text_file(o.out, text);
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Domain-adaptive multi-attribute recognition", "daan"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto* synth = app.add_subcommand("synth", "Render the synthetic two-domain dataset");
  synth->add_option("--config", o.config, "Synth config file")->check(CLI::ExistingFile);
  synth->add_option("--seed", seed, "Renderer seed");
  synth->add_option("--out", o.out, "Output directory");

  auto* train = app.add_subcommand("train", "Train one method");
  train->add_option("--config", o.config, "Train config file")->check(CLI::ExistingFile);
  train->add_option("--method", o.method, "Method")
      ->check(CLI::IsMember({"source_only", "target_only", "daan_l", "daan_f", "daan_a", "daan_lf", "daan_la",
                             "daan_lfa"}));
  train->add_option("--multitask", o.multitask, "Grouped heads on|off")->check(CLI::IsMember({"on", "off"}));
  train->add_option("--seed", seed, "Training seed");
  train->add_option("--out", o.out, "Run directory");
  train->add_option("--checkpoint", o.checkpoint, "Resume from checkpoint")->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled manifest");
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--manifest", o.manifest, "Labeled manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", o.out, "Report CSV path");

  auto* cam = app.add_subcommand("cam", "Render class activation overlays");
  cam->add_option("--checkpoint", o.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  cam->add_option("--manifest", o.manifest, "Manifest holding the samples")->required()->check(CLI::ExistingFile);
  cam->add_option("--ids", o.ids, "Sample ids")->required()->delimiter(',');
  cam->add_option("--classes", o.classes, "Classes as <class> or <group>/<class>")->required()->delimiter(',');
  cam->add_option("--out", o.out, "Output directory");

  auto* votes = app.add_subcommand("votes", "Aggregate annotator votes by majority");
  votes->add_option("votes", o.votes, "Vote file")->required()->check(CLI::ExistingFile);
  votes->add_option("schema", o.schema, "Schema file")->required()->check(CLI::ExistingFile);
  votes->add_option("--out", o.out, "Output label file (standard output when omitted)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    out << target->help();
    return 0;
  } catch (const CLI::ParseError& e) {
    const CLI::App* target = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << "error: " << e.what() << "\n" << target->help();
    return 2;
  }
  for (auto* sub : {synth, train}) {
    if (sub->parsed() && sub->count("--seed")) o.seed = seed;
  }

  try {
    if (synth->parsed()) return cmd_synth(o, out);
    if (train->parsed()) return cmd_train(o, out);
    if (eval->parsed()) return cmd_eval(o, out);
    if (cam->parsed()) return cmd_cam(o, out);
    if (votes->parsed()) return cmd_votes(o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << app.help();
  return 2;
}

}  // namespace daan
