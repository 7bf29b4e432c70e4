// Checkpoint container.
//
// Named entries: schema_text, schema_hash, config_text, step, extractor,
// heads (one head_<group> weight/bias pair per group), disc_Fs, disc_Ft,
// disc_As, disc_At, opt_main, opt_disc, opt_gen (learned translator only)
// and translator.

#pragma once

#include <cstdint>
#include <string>

#include <torch/torch.h>

#include "daan/model.hpp"
#include "daan/schema.hpp"
#include "daan/trainer.hpp"

namespace daan {

void write_string(torch::serialize::OutputArchive& ar, const std::string& key, const std::string& value);
std::string read_string(torch::serialize::InputArchive& ar, const std::string& key);

void write_network(torch::serialize::OutputArchive& ar, DaanNetImpl& net);
void read_network(torch::serialize::InputArchive& ar, DaanNetImpl& net);

/// Throws Error when the archive's schema hash differs from `schema`'s.
void check_schema_hash(torch::serialize::InputArchive& ar, const AttributeSchema& schema, const std::string& path);

struct CheckpointMeta {
  AttributeSchema schema;
  TrainConfig config;
  std::int64_t step = 0;
  std::uint64_t schema_hash = 0;
};

CheckpointMeta read_checkpoint_meta(const std::string& path);

/// Network weights only, for evaluation and CAM rendering.
struct LoadedModel {
  CheckpointMeta meta;
  DaanNet net{nullptr};
};
LoadedModel load_model(const std::string& path);

}  // namespace daan
