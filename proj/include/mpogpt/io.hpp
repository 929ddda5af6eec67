// SPDX-License-Identifier: Apache-2.0
//
// Run configuration, checkpoints and report files.
//
// Checkpoint layout (all integers little-endian):
//   8 bytes   magic "MPOGPTCK"
//   8 bytes   u64 header length H
//   H bytes   UTF-8 JSON header
//   payload   tensors back to back, offsets relative to the payload start
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mpogpt/data.hpp"
#include "mpogpt/model.hpp"
#include "mpogpt/train.hpp"

namespace mpogpt {

struct CorpusConfig {
  std::string path = "data/shakespeare.txt";
  std::string url;
  std::string sha256;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  CorpusConfig corpus;
  std::vector<std::size_t> chis{4, 8, 16, 32};
};

/// Full JSON dump including defaults.
std::string to_json(const RunConfig& cfg);
/// Missing keys keep their defaults; unknown keys and bad types throw InputError.
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

inline constexpr int kCheckpointVersion = 1;

struct CheckpointData {
  TransformerF model;
  TrainConfig train;
  CharVocab vocab;
};

void save_checkpoint(const std::filesystem::path& path, const TransformerF& model, const TrainConfig& train,
                     const CharVocab& vocab);
/// Validates magic, version, offsets and payload length before building the
/// model; any defect throws InputError and nothing is returned.
CheckpointData load_checkpoint(const std::filesystem::path& path);

/// "step,train_loss,val_loss,val_acc,lr"
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRecord& rec);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records);

/// "layer,chi,rel_err,params_dense,params_mpo"
void write_layer_errors_csv(const std::filesystem::path& path, const std::vector<LayerError>& layers);

struct SweepRow {
  std::string name;
  std::string mode;
  std::size_t chi = 0;  // 0 for the dense baseline
  std::size_t params = 0;
  double ratio = 0.0;  // dense params / params
  double val_loss = 0.0;
  double val_acc = 0.0;
  double acc_gap = 0.0;  // dense acc - val_acc
  double acc_per_sqrt_params = 0.0;
  std::string status = "ok";
};

/// Fills ratio, gap and acc/sqrt(N) from the first row (the dense baseline).
void finalize_sweep_rows(std::vector<SweepRow>& rows);
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);
void write_sweep_json(const std::filesystem::path& path, const std::vector<SweepRow>& rows,
                      const std::vector<LayerError>& layers);

/// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// Shortest round-trip decimal form of a double ("nan" for NaN).
std::string format_double(double x);

}  // namespace mpogpt
