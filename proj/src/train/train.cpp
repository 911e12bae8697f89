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

#include "auscqa/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>

#include "auscqa/error.hpp"
#include "auscqa/ops.hpp"
#include "internal/json_util.hpp"

namespace auscqa {
namespace {

using nlohmann::json;
using internal::check_keys;
using internal::read;

std::uint32_t tag_hash(const std::string& s) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : s) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

std::mt19937_64 seeded(std::uint64_t seed, std::uint32_t salt, std::uint32_t extra = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    salt, extra};
  return std::mt19937_64(seq);
}

// Salts for independent random streams derived from the run seed.
constexpr std::uint32_t kSaltSplit = 0x5e11;
constexpr std::uint32_t kSaltSampler = 0x5a3b;
constexpr std::uint32_t kSaltModel = 0x3d01;
constexpr std::uint32_t kSaltLm = 0x1a40;

std::vector<std::string> site_list(const PatientRecord& r) {
  std::vector<std::string> sites;
  sites.reserve(r.clips.size());
  for (const auto& c : r.clips) sites.push_back(c.site);
  return sites;
}

std::vector<std::string> clip_ids(const PatientRecord& r) {
  std::vector<std::string> ids;
  ids.reserve(r.clips.size());
  for (const auto& c : r.clips) ids.push_back(clip_id(c));
  return ids;
}

std::vector<PatientRecord> select(std::span<const PatientRecord> records,
                                  const std::vector<std::string>& ids) {
  const std::set<std::string> want(ids.begin(), ids.end());
  std::vector<PatientRecord> out;
  for (const auto& r : records)
    if (want.count(r.patient_id)) out.push_back(r);
  return out;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::kData, path.string() + ": " + e.what());
  }
}

double mean_loss(const AudioQAModel& model, std::span<const PatientRecord> records,
                 const ClipCache& cache) {
  double total = 0.0;
  for (const auto& r : records) {
    const LatentBundle z = model.encode_bag(cache.clips(r.patient_id), clip_ids(r));
    total += model.qa_loss(z, site_list(r), r.qa).item();
  }
  return records.empty() ? 0.0 : total / static_cast<double>(records.size());
}

std::string seconds_label(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", s);
  return buf;
}

}  // namespace

json SplitManifest::to_json() const {
  return {{"train", train}, {"val", val}, {"test", test}, {"dataset_of", dataset_of}};
}

SplitManifest SplitManifest::from_json(const json& j) {
  SplitManifest s;
  try {
    s.train = j.at("train").get<std::vector<std::string>>();
    s.val = j.at("val").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
    s.dataset_of = j.at("dataset_of").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kData, std::string("bad split manifest: ") + e.what());
  }
  return s;
}

SplitManifest make_splits(std::span<const PatientRecord> records, const SplitRatios& ratios,
                          std::uint64_t seed) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    fail(ErrorKind::kUsage, "split ratios must be non-negative and sum to 1");
  }
  const std::size_t needed = (ratios.train > 0) + (ratios.val > 0) + (ratios.test > 0);
  std::map<std::string, std::vector<std::string>> by_tag;
  SplitManifest s;
  for (const auto& r : records) {
    if (!s.dataset_of.emplace(r.patient_id, r.dataset).second) {
      fail(ErrorKind::kData, "duplicate patient id " + r.patient_id);
    }
    by_tag[r.dataset].push_back(r.patient_id);
  }
  for (auto& [tag, ids] : by_tag) {
    const std::size_t n = ids.size();
    if (n < needed) {
      fail(ErrorKind::kData, "dataset '" + tag + "' has " + std::to_string(n) +
                                 " patients, fewer than the " + std::to_string(needed) +
                                 " non-empty splits");
    }
    std::sort(ids.begin(), ids.end());
    auto rng = seeded(seed, kSaltSplit, tag_hash(tag));
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto part = [&](double ratio) {
      if (ratio <= 0.0) return std::size_t{0};
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio * n)));
    };
    std::size_t n_val = part(ratios.val), n_test = part(ratios.test);
    const std::size_t min_train = ratios.train > 0 ? 1 : 0;
    while (n_val + n_test + min_train > n) (n_val >= n_test ? n_val : n_test) -= 1;
    if (ratios.train <= 0.0) n_test = n - n_val;
    s.val.insert(s.val.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
    s.test.insert(s.test.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_val),
                  ids.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
    s.train.insert(s.train.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_val + n_test),
                   ids.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

BalancedSampler::BalancedSampler(std::span<const std::string> tags, std::uint64_t seed,
                                 bool balanced)
    : rng_(seeded(seed, kSaltSampler)), balanced_(balanced) {
  if (tags.empty()) fail(ErrorKind::kData, "sampler needs at least one item");
  std::map<std::string, std::size_t> pool_of;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto [it, inserted] = pool_of.emplace(tags[i], pools_.size());
    if (inserted) pools_.emplace_back();
    pools_[it->second].items.push_back(i);
    all_.items.push_back(i);
  }
  // Tag pools in sorted-tag order so the stream does not depend on input order.
  std::vector<Pool> sorted;
  for (const auto& [tag, idx] : pool_of) sorted.push_back(std::move(pools_[idx]));
  pools_ = std::move(sorted);
  for (auto& p : pools_) p.cursor = p.items.size();
  all_.cursor = all_.items.size();
}

std::size_t BalancedSampler::draw(Pool& pool) {
  if (pool.cursor >= pool.items.size()) {
    std::shuffle(pool.items.begin(), pool.items.end(), rng_);
    pool.cursor = 0;
  }
  return pool.items[pool.cursor++];
}

std::size_t BalancedSampler::next() {
  if (!balanced_ || pools_.size() == 1) return draw(balanced_ ? pools_[0] : all_);
  const std::size_t tag = std::uniform_int_distribution<std::size_t>(0, pools_.size() - 1)(rng_);
  return draw(pools_[tag]);
}

json TrainConfig::to_json() const {
  return {{"model", model.to_json()},
          {"lr_encoder", lr_encoder},
          {"lr_adapter", lr_adapter},
          {"weight_decay", weight_decay},
          {"clip_norm", clip_norm},
          {"micro_batch", micro_batch},
          {"accum_steps", accum_steps},
          {"epochs", epochs},
          {"steps_per_epoch", steps_per_epoch},
          {"max_steps", max_steps},
          {"balanced_sampling", balanced_sampling},
          {"split", {{"train", split.train}, {"val", split.val}, {"test", split.test}}},
          {"seed", seed},
          {"lm_epochs", lm_epochs},
          {"lm_learning_rate", lm_learning_rate},
          {"lm_batch", lm_batch}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  check_keys(j,
             {"model", "lr_encoder", "lr_adapter", "weight_decay", "clip_norm", "micro_batch",
              "accum_steps", "epochs", "steps_per_epoch", "max_steps", "balanced_sampling",
              "split", "seed", "lm_epochs", "lm_learning_rate", "lm_batch"},
             "train config");
  TrainConfig c;
  try {
    if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
    read(j, "lr_encoder", c.lr_encoder);
    read(j, "lr_adapter", c.lr_adapter);
    read(j, "weight_decay", c.weight_decay);
    read(j, "clip_norm", c.clip_norm);
    read(j, "micro_batch", c.micro_batch);
    read(j, "accum_steps", c.accum_steps);
    read(j, "epochs", c.epochs);
    read(j, "steps_per_epoch", c.steps_per_epoch);
    read(j, "max_steps", c.max_steps);
    read(j, "balanced_sampling", c.balanced_sampling);
    if (j.contains("split")) {
      const json& s = j.at("split");
      check_keys(s, {"train", "val", "test"}, "split");
      read(s, "train", c.split.train);
      read(s, "val", c.split.val);
      read(s, "test", c.split.test);
    }
    read(j, "seed", c.seed);
    read(j, "lm_epochs", c.lm_epochs);
    read(j, "lm_learning_rate", c.lm_learning_rate);
    read(j, "lm_batch", c.lm_batch);
  } catch (const json::exception& e) {
    fail(ErrorKind::kUsage, std::string("bad train config: ") + e.what());
  }
  c.validate();
  return c;
}

void TrainConfig::validate() const {
  model.validate();
  if (micro_batch == 0 || accum_steps == 0) {
    fail(ErrorKind::kUsage, "micro_batch and accum_steps must be positive");
  }
  if (!(lr_encoder >= 0.0) || !(lr_adapter >= 0.0) || !(weight_decay >= 0.0)) {
    fail(ErrorKind::kUsage, "learning rates and weight decay must be non-negative");
  }
  if (!(clip_norm > 0.0)) fail(ErrorKind::kUsage, "clip_norm must be positive");
  if (lm_batch == 0) fail(ErrorKind::kUsage, "lm_batch must be positive");
}

ClipCache::ClipCache(std::span<const PatientRecord> records, const std::filesystem::path& root,
                     double max_seconds)
    : max_seconds_(max_seconds) {
  for (const auto& r : records) clips_[r.patient_id] = load_patient_clips(r, root, max_seconds);
}

const std::vector<AudioClip>& ClipCache::clips(const std::string& patient_id) const {
  const auto it = clips_.find(patient_id);
  if (it == clips_.end()) fail(ErrorKind::kData, "no clips loaded for patient " + patient_id);
  return it->second;
}

std::vector<std::string> qa_corpus(std::span<const PatientRecord> records) {
  std::vector<std::string> out;
  for (const auto& r : records) {
    const auto sites = site_list(r);
    for (const auto& q : r.qa) out.push_back(prompt_text(sites, q.question) + " " + q.answer);
  }
  return out;
}

Checkpoint pretrain_lm(const TrainConfig& config, std::span<const PatientRecord> records) {
  config.validate();
  const SplitManifest split = make_splits(records, config.split, config.seed);
  const auto train_records = select(records, split.train);
  const auto corpus = qa_corpus(train_records);
  if (corpus.empty()) fail(ErrorKind::kData, "training split holds no QA pairs");
  const TextVocab vocab = TextVocab::build(corpus, 2);
  std::vector<std::vector<int>> seqs;
  for (const auto& r : train_records) {
    const auto sites = site_list(r);
    for (const auto& q : r.qa) {
      seqs.push_back(assemble_example(vocab, sites, q.question, q.answer, config.model.lm.max_seq).ids);
    }
  }
  PretrainOptions opt;
  opt.epochs = config.lm_epochs;
  opt.learning_rate = config.lm_learning_rate;
  opt.batch = config.lm_batch;
  opt.seed = seeded(config.seed, kSaltLm)();
  Checkpoint ck;
  ck.store = pretrain_text_lm(seqs, config.model.lm, vocab.size(), opt);
  ck.vocab = vocab.words();
  ck.config = {{"kind", kKindTextLm}, {"lm", lm_config_to_json(config.model.lm)}};
  return ck;
}

TrainResult train(const TrainConfig& config, std::span<const PatientRecord> records,
                  const ClipCache& cache, const Checkpoint& text_lm,
                  const std::filesystem::path& out_dir, const LogCallback& on_log) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  std::filesystem::create_directories(out_dir);
  const SplitManifest split = make_splits(records, config.split, config.seed);
  write_json(out_dir / "config.json", config.to_json());
  write_json(out_dir / "splits.json", split.to_json());
  const auto train_records = select(records, split.train);
  const auto val_records = select(records, split.val);
  if (train_records.empty()) fail(ErrorKind::kData, "training split is empty");

  AudioQAModel model(config.model, text_lm, seeded(config.seed, kSaltModel)());
  const std::string lm_digest = group_digest(model.store(), kGroupLm);
  const auto groups = make_groups(model.store(), {{kGroupEncoder, config.lr_encoder},
                                                  {kGroupAdapter, config.lr_adapter}});
  AdamWOptions adam;
  adam.weight_decay = config.weight_decay;
  AdamW opt(adam);

  std::vector<std::string> tags;
  for (const auto& r : train_records) tags.push_back(r.dataset);
  BalancedSampler sampler(tags, config.seed, config.balanced_sampling);

  const std::size_t per_step = config.micro_batch * config.accum_steps;
  const std::size_t steps_per_epoch =
      config.steps_per_epoch > 0 ? config.steps_per_epoch
                                 : (train_records.size() + per_step - 1) / per_step;
  const json lr = {{"encoder", config.lr_encoder}, {"adapter", config.lr_adapter}};

  std::ofstream log_out(out_dir / "metrics.jsonl");
  if (!log_out) fail(ErrorKind::kIo, "cannot write " + (out_dir / "metrics.jsonl").string());
  TrainResult result;
  const auto emit = [&](json rec) {
    log_out << rec.dump() << '\n';
    log_out.flush();
    result.log.push_back(rec);
    if (on_log) on_log(result.log.back());
  };

  double best = std::numeric_limits<double>::infinity();
  bool stop = false;
  for (std::size_t epoch = 1; epoch <= config.epochs && !stop; ++epoch) {
    for (std::size_t s = 0; s < steps_per_epoch && !stop; ++s) {
      model.store().zero_grad();
      double loss_sum = 0.0;
      for (std::size_t k = 0; k < per_step; ++k) {
        const PatientRecord& r = train_records[sampler.next()];
        const LatentBundle z = model.encode_bag(cache.clips(r.patient_id), clip_ids(r));
        const Tensor loss = model.qa_loss(z, site_list(r), r.qa);
        if (!std::isfinite(loss.item())) {
          fail(ErrorKind::kNumeric, "non-finite loss at step " + std::to_string(result.steps + 1) +
                                        " for patient " + r.patient_id);
        }
        loss_sum += loss.item();
        backward(ops::scale(loss, 1.0 / static_cast<double>(per_step)));
      }
      clip_grad_norm(groups, config.clip_norm);
      opt.step(groups);
      ++result.steps;
      emit({{"step", result.steps},
            {"epoch", epoch},
            {"split", "train"},
            {"loss", loss_sum / static_cast<double>(per_step)},
            {"lr", lr},
            {"gate_means", model.gates()}});
      if (config.max_steps > 0 && result.steps >= config.max_steps) stop = true;
    }
    model.store().zero_grad();
    const double val = val_records.empty() ? 0.0 : mean_loss(model, val_records, cache);
    if (!val_records.empty()) {
      emit({{"step", result.steps},
            {"epoch", epoch},
            {"split", "val"},
            {"loss", val},
            {"lr", lr},
            {"gate_means", model.gates()}});
    }
    if (val_records.empty() || val < best) {
      best = val;
      result.best_epoch = epoch;
      result.best_val_loss = val;
      model.save(out_dir / "best.ckpt");
    }
  }
  model.store().zero_grad();
  model.save(out_dir / "last.ckpt");
  if (group_digest(model.store(), kGroupLm) != lm_digest) {
    fail(ErrorKind::kInternal, "frozen LM parameters changed during training");
  }
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

std::vector<Prediction> predict(const AudioQAModel& model, std::span<const PatientRecord> records,
                                const ClipCache& cache) {
  std::vector<Prediction> out;
  for (const auto& r : records) {
    const auto sites = site_list(r);
    const LatentBundle z = model.encode_bag(cache.clips(r.patient_id), clip_ids(r));
    for (const auto& q : r.qa) {
      out.push_back({r.patient_id, r.dataset, q.kind, q.question, q.answer,
                     model.answer(&z, sites, q.question)});
    }
  }
  return out;
}

json RunReport::to_json() const {
  return {{"model", model.to_json()}, {"gate_zero_baseline", baseline.to_json()}};
}

RunReport run_experiment(const TrainConfig& config, std::span<const PatientRecord> records,
                         const ClipCache& cache, const Checkpoint& text_lm,
                         const std::filesystem::path& out_dir, const LogCallback& on_log) {
  train(config, records, cache, text_lm, out_dir, on_log);
  const SplitManifest split = make_splits(records, config.split, config.seed);
  const auto test_records = select(records, split.test);
  if (test_records.empty()) fail(ErrorKind::kData, "test split is empty");
  const HashEmbedder embedder;
  AudioQAModel model = AudioQAModel::load(out_dir / "best.ckpt");
  RunReport report;
  const auto preds = predict(model, test_records, cache);
  write_predictions(out_dir / "predictions.jsonl", preds);
  report.model = evaluate(preds, &embedder);
  model.zero_gates();
  const auto base = predict(model, test_records, cache);
  write_predictions(out_dir / "baseline_predictions.jsonl", base);
  report.baseline = evaluate(base, &embedder);
  write_json(out_dir / "report.json", report.to_json());
  return report;
}

std::vector<AblationRow> ablate_context(const TrainConfig& config,
                                        std::span<const PatientRecord> records,
                                        const std::filesystem::path& data_root,
                                        const Checkpoint& text_lm,
                                        std::span<const double> seconds,
                                        const std::filesystem::path& out_dir,
                                        const std::filesystem::path& reuse_dir,
                                        const LogCallback& on_log) {
  if (seconds.empty()) fail(ErrorKind::kUsage, "ablation needs at least one duration");
  const HashEmbedder embedder;
  const auto reusable = [&](const std::filesystem::path& dir, const json& cfg) {
    return !dir.empty() && std::filesystem::exists(dir / "config.json") &&
           std::filesystem::exists(dir / "predictions.jsonl") &&
           std::filesystem::exists(dir / "report.json") && read_json(dir / "config.json") == cfg;
  };
  std::vector<AblationRow> rows;
  for (double s : seconds) {
    if (!(s > 0.0)) fail(ErrorKind::kUsage, "ablation durations must be positive");
    TrainConfig c = config;
    c.model.max_seconds = s;
    const json cfg = c.to_json();
    AblationRow row;
    row.seconds = s;
    row.run_dir = out_dir / ("ctx_" + seconds_label(s) + "s");
    for (const auto& dir : {reuse_dir, row.run_dir}) {
      if (reusable(dir, cfg)) {
        row.run_dir = dir;
        row.reused = true;
        break;
      }
    }
    if (row.reused) {
      row.report = evaluate(read_predictions(row.run_dir / "predictions.jsonl"), &embedder);
    } else {
      const ClipCache cache(records, data_root, s);
      row.report = run_experiment(c, records, cache, text_lm, row.run_dir, on_log).model;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_table(std::span<const AblationRow> rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%8s %6s %8s %8s %8s %8s %8s  %s\n", "seconds", "n", "acc",
                "f1", "contain", "rougeL", "meteor", "run");
  out += line;
  for (const auto& r : rows) {
    const auto& o = r.report.overall;
    std::snprintf(line, sizeof(line), "%8s %6zu %8.4f %8.4f %8.4f %8.4f %8.4f  %s%s\n",
                  seconds_label(r.seconds).c_str(), o.n, o.binary.accuracy, o.binary.f1_macro,
                  o.contains_match, o.rouge_l, o.meteor, r.run_dir.string().c_str(),
                  r.reused ? " (reused)" : "");
    out += line;
  }
  return out;
}

json ablation_json(std::span<const AblationRow> rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"seconds", r.seconds},
                   {"reused", r.reused},
                   {"run_dir", r.run_dir.string()},
                   {"report", r.report.to_json()}});
  }
  return out;
}

}  // namespace auscqa
