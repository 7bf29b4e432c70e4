#include "daan/checkpoint.hpp"

#include <cstring>

#include "daan/config.hpp"
#include "daan/error.hpp"

namespace daan {

void write_string(torch::serialize::OutputArchive& ar, const std::string& key, const std::string& value) {
  auto t = torch::empty({static_cast<std::int64_t>(value.size())}, torch::kUInt8);
  if (!value.empty()) std::memcpy(t.data_ptr<std::uint8_t>(), value.data(), value.size());
  ar.write(key, t);
}

std::string read_string(torch::serialize::InputArchive& ar, const std::string& key) {
  torch::Tensor t;
  if (!ar.try_read(key, t)) throw Error("checkpoint has no entry '" + key + "'");
  t = t.contiguous();
  std::string s(static_cast<std::size_t>(t.numel()), '\0');
  if (!s.empty()) std::memcpy(s.data(), t.data_ptr<std::uint8_t>(), s.size());
  return s;
}

namespace {

template <class Fn>
void for_each_part(DaanNetImpl& net, Fn&& fn) {
  fn("extractor", *net.extractor);
  fn("heads", *net.heads);
  for (auto id : {DiscriminatorId::Fs, DiscriminatorId::Ft, DiscriminatorId::As, DiscriminatorId::At})
    fn("disc_" + to_string(id), *net.discriminator(id));
}

}  // namespace

void write_network(torch::serialize::OutputArchive& ar, DaanNetImpl& net) {
  for_each_part(net, [&](const std::string& name, torch::nn::Module& m) {
    torch::serialize::OutputArchive sub;
    m.save(sub);
    ar.write(name, sub);
  });
}

void read_network(torch::serialize::InputArchive& ar, DaanNetImpl& net) {
  for_each_part(net, [&](const std::string& name, torch::nn::Module& m) {
    torch::serialize::InputArchive sub;
    if (!ar.try_read(name, sub)) throw Error("checkpoint has no entry '" + name + "'");
    m.load(sub);
  });
}

void check_schema_hash(torch::serialize::InputArchive& ar, const AttributeSchema& schema, const std::string& path) {
  torch::Tensor h;
  if (!ar.try_read("schema_hash", h)) throw Error(path + ": checkpoint has no schema hash");
  const auto stored = static_cast<std::uint64_t>(h.item<std::int64_t>());
  if (stored != schema.hash())
    throw Error(path + ": checkpoint schema hash " + std::to_string(stored) + " does not match schema hash " +
                std::to_string(schema.hash()));
}

CheckpointMeta read_checkpoint_meta(const std::string& path) {
  torch::serialize::InputArchive ar;
  ar.load_from(path);
  CheckpointMeta meta;
  meta.schema = AttributeSchema::parse(read_string(ar, "schema_text"));
  apply_train_config(KeyValueConfig::parse(read_string(ar, "config_text"), path), meta.config);
  torch::Tensor step, hash;
  ar.read("step", step);
  ar.read("schema_hash", hash);
  meta.step = step.item<std::int64_t>();
  meta.schema_hash = static_cast<std::uint64_t>(hash.item<std::int64_t>());
  if (meta.schema_hash != meta.schema.hash()) throw Error(path + ": corrupt checkpoint (schema hash)");
  return meta;
}

LoadedModel load_model(const std::string& path) {
  LoadedModel m;
  m.meta = read_checkpoint_meta(path);
  m.net = DaanNet(m.meta.config.model, m.meta.schema);
  torch::serialize::InputArchive ar;
  ar.load_from(path);
  read_network(ar, *m.net);
  m.net->eval();
  return m;
}

}  // namespace daan
