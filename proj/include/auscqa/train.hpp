// Copyright 2026 The auscqa Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Splits, sampling, LM pretraining, fusion training, prediction and the
// context-length ablation.
//
// A run directory holds:
//   config.json     the TrainConfig
//   splits.json     patient ids per split
//   metrics.jsonl   {step, epoch, split, loss, lr: {encoder, adapter},
//                    gate_means: [tanh(alpha) per cross block]}
//   best.ckpt       lowest validation loss
//   last.ckpt       end of training
//   report.json     test-split MetricReport plus the gate-zero baseline
//   predictions.jsonl, baseline_predictions.jsonl

#ifndef AUSCQA_TRAIN_HPP_
#define AUSCQA_TRAIN_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "auscqa/data.hpp"
#include "auscqa/eval.hpp"
#include "auscqa/model.hpp"
#include "json.hpp"

namespace auscqa {

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct SplitManifest {
  std::vector<std::string> train, val, test;
  std::map<std::string, std::string> dataset_of;

  nlohmann::json to_json() const;
  static SplitManifest from_json(const nlohmann::json& j);
};

// Per dataset tag: sorted ids, seeded shuffle, then round(val * n) to val,
// round(test * n) to test and the rest to train. A tag with fewer patients
// than non-empty splits is a data error.
SplitManifest make_splits(std::span<const PatientRecord> records, const SplitRatios& ratios,
                          std::uint64_t seed);

// Draws item indices. Balanced: a tag uniformly, then the next item of that
// tag's shuffled order, reshuffled when exhausted. Unbalanced: the next
// item of a global shuffled order, reshuffled when exhausted.
class BalancedSampler {
 public:
  BalancedSampler(std::span<const std::string> tags, std::uint64_t seed, bool balanced = true);
  std::size_t next();

 private:
  struct Pool {
    std::vector<std::size_t> items;
    std::size_t cursor = 0;
  };
  std::size_t draw(Pool& pool);

  std::mt19937_64 rng_;
  bool balanced_;
  std::vector<Pool> pools_;
  Pool all_;
};

struct TrainConfig {
  ModelConfig model;
  double lr_encoder = 5e-6;
  double lr_adapter = 1.5e-5;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  std::size_t micro_batch = 4;
  std::size_t accum_steps = 4;
  std::size_t epochs = 10;
  // Optimizer steps per epoch; 0 means ceil(n_train / (micro * accum)).
  std::size_t steps_per_epoch = 0;
  // Stop after this many optimizer steps; 0 means no cap.
  std::size_t max_steps = 0;
  bool balanced_sampling = true;
  SplitRatios split;
  std::uint64_t seed = 0;
  // Text LM pretraining.
  std::size_t lm_epochs = 30;
  double lm_learning_rate = 3e-3;
  std::size_t lm_batch = 8;

  nlohmann::json to_json() const;
  // Unknown keys are usage errors; missing keys keep their defaults.
  static TrainConfig from_json(const nlohmann::json& j);
  void validate() const;
};

// Preprocessed clips for a set of patients, loaded once.
class ClipCache {
 public:
  ClipCache(std::span<const PatientRecord> records, const std::filesystem::path& root,
            double max_seconds);
  const std::vector<AudioClip>& clips(const std::string& patient_id) const;
  double max_seconds() const { return max_seconds_; }

 private:
  double max_seconds_;
  std::map<std::string, std::vector<AudioClip>> clips_;
};

// Every QA example (prompt plus answer) of the given patients as text,
// in manifest order.
std::vector<std::string> qa_corpus(std::span<const PatientRecord> records);

// Builds the vocabulary from the training split and pretrains the text
// decoder on its QA examples. Returns a text LM checkpoint.
Checkpoint pretrain_lm(const TrainConfig& config, std::span<const PatientRecord> records);

struct TrainResult {
  std::vector<nlohmann::json> log;
  std::size_t steps = 0;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  double seconds = 0.0;
};

// Observer called after each log record is appended.
using LogCallback = std::function<void(const nlohmann::json&)>;

// Trains encoder and adapters with the LM frozen. Writes the run directory
// files except report.json and predictions.
TrainResult train(const TrainConfig& config, std::span<const PatientRecord> records,
                  const ClipCache& cache, const Checkpoint& text_lm,
                  const std::filesystem::path& out_dir, const LogCallback& on_log = {});

// Greedy answers for every QA pair of the patients.
std::vector<Prediction> predict(const AudioQAModel& model, std::span<const PatientRecord> records,
                                const ClipCache& cache);

struct RunReport {
  MetricReport model;
  MetricReport baseline;
  nlohmann::json to_json() const;
};

// Trains, then evaluates best.ckpt and its gate-zero copy on the test split.
RunReport run_experiment(const TrainConfig& config, std::span<const PatientRecord> records,
                         const ClipCache& cache, const Checkpoint& text_lm,
                         const std::filesystem::path& out_dir, const LogCallback& on_log = {});

struct AblationRow {
  double seconds = 0.0;
  bool reused = false;
  std::filesystem::path run_dir;
  MetricReport report;
};

// One run per context length under out_dir/ctx_<s>s. A run whose directory
// already holds a report for an identical config is reused; so is
// `reuse_dir` when its config matches.
std::vector<AblationRow> ablate_context(const TrainConfig& config,
                                        std::span<const PatientRecord> records,
                                        const std::filesystem::path& data_root,
                                        const Checkpoint& text_lm,
                                        std::span<const double> seconds,
                                        const std::filesystem::path& out_dir,
                                        const std::filesystem::path& reuse_dir = {},
                                        const LogCallback& on_log = {});

std::string ablation_table(std::span<const AblationRow> rows);
nlohmann::json ablation_json(std::span<const AblationRow> rows);

}  // namespace auscqa

#endif  // AUSCQA_TRAIN_HPP_
