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

#include "auscqa/auscqa.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "auscqa/error.hpp"
#include "auscqa/synth.hpp"
#include "auscqa/train.hpp"
#include "internal/json_util.hpp"

struct auscqa_model {
  auscqa::AudioQAModel model;
};

namespace {

using nlohmann::json;
using auscqa::ErrorKind;

thread_local std::string g_last_error;

auscqa_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return AUSCQA_ERR_USAGE;
    case ErrorKind::kData: return AUSCQA_ERR_DATA;
    case ErrorKind::kIo: return AUSCQA_ERR_IO;
    case ErrorKind::kNumeric: return AUSCQA_ERR_NUMERIC;
    case ErrorKind::kInternal: break;
  }
  return AUSCQA_ERR_INTERNAL;
}

// Runs `fn`, mapping exceptions to status codes and the thread's last error.
template <typename Fn>
auscqa_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return AUSCQA_OK;
  } catch (const auscqa::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const json::exception& e) {
    g_last_error = std::string("json: ") + e.what();
    return AUSCQA_ERR_USAGE;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return AUSCQA_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return AUSCQA_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return AUSCQA_ERR_INTERNAL;
  }
}

void require(const void* p, const char* name) {
  if (p == nullptr) auscqa::fail(ErrorKind::kUsage, std::string(name) + " must not be null");
}

std::string str(const char* s) { return s == nullptr ? std::string() : std::string(s); }

json parse_config(const char* text) {
  if (text == nullptr || *text == '\0') return json::object();
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    auscqa::fail(ErrorKind::kUsage, std::string("config is not valid JSON: ") + e.what());
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  if (out != nullptr) *out = dup(s);
}

auscqa::LogCallback log_adapter(auscqa_log_fn fn, void* user) {
  if (fn == nullptr) return {};
  return [fn, user](const json& rec) { fn(rec.dump().c_str(), user); };
}

std::filesystem::path data_root(const char* root, const char* manifest) {
  if (root != nullptr && *root != '\0') return root;
  return std::filesystem::path(manifest).parent_path();
}

}  // namespace

extern "C" {

const char* auscqa_version(void) { return "0.1.0"; }

const char* auscqa_last_error(void) { return g_last_error.c_str(); }

void auscqa_string_free(char* s) { std::free(s); }

auscqa_status auscqa_synth(const char* spec_json, const char* out_dir, char** summary_json) {
  return guarded([&] {
    require(out_dir, "out_dir");
    const auto spec = auscqa::SynthSpec::from_json(parse_config(spec_json));
    const auto result = auscqa::generate(spec, out_dir);
    std::size_t clips = 0;
    for (const auto& r : result.records) clips += r.clips.size();
    put(summary_json,
        json{{"patients", result.records.size()},
             {"clips", clips},
             {"manifest", (std::filesystem::path(out_dir) / "manifest.jsonl").string()}}
            .dump());
  });
}

auscqa_status auscqa_preprocess(const char* in_path, const char* site, double max_seconds,
                                const char* out_path, char** info_json) {
  return guarded([&] {
    require(in_path, "in_path");
    require(out_path, "out_path");
    if (!(max_seconds > 0.0)) auscqa::fail(ErrorKind::kUsage, "max_seconds must be positive");
    const auto clip = auscqa::preprocess_file(in_path, str(site), "", max_seconds);
    auscqa::write_clip(out_path, clip);
    put(info_json, json{{"samples", clip.waveform.size()},
                        {"valid_len", clip.valid_len},
                        {"seconds", static_cast<double>(clip.valid_len) / auscqa::kTargetRate},
                        {"tokens", clip.waveform.size() / auscqa::kPatchSamples}}
                       .dump());
  });
}

auscqa_status auscqa_pretrain_lm(const char* train_config_json, const char* manifest_path,
                                 const char* out_checkpoint) {
  return guarded([&] {
    require(manifest_path, "manifest_path");
    require(out_checkpoint, "out_checkpoint");
    const auto config = auscqa::TrainConfig::from_json(parse_config(train_config_json));
    const auto records = auscqa::read_manifest(manifest_path);
    const auto ck = auscqa::pretrain_lm(config, records);
    auscqa::save_checkpoint(out_checkpoint, ck.config, ck.vocab, ck.store);
  });
}

auscqa_status auscqa_train(const char* train_config_json, const char* manifest_path,
                           const char* data_root_dir, const char* lm_checkpoint,
                           const char* out_dir, auscqa_log_fn on_log, void* user,
                           char** report_json) {
  return guarded([&] {
    require(manifest_path, "manifest_path");
    require(lm_checkpoint, "lm_checkpoint");
    require(out_dir, "out_dir");
    const auto config = auscqa::TrainConfig::from_json(parse_config(train_config_json));
    const auto records = auscqa::read_manifest(manifest_path);
    const auto lm = auscqa::load_checkpoint(lm_checkpoint);
    const auscqa::ClipCache cache(records, data_root(data_root_dir, manifest_path),
                                  config.model.max_seconds);
    const auto report =
        auscqa::run_experiment(config, records, cache, lm, out_dir, log_adapter(on_log, user));
    put(report_json, report.to_json().dump());
  });
}

auscqa_status auscqa_ablate(const char* train_config_json, const char* manifest_path,
                            const char* data_root_dir, const char* lm_checkpoint,
                            const double* seconds, size_t n_seconds, const char* out_dir,
                            const char* reuse_dir, auscqa_log_fn on_log, void* user,
                            char** result_json) {
  return guarded([&] {
    require(manifest_path, "manifest_path");
    require(lm_checkpoint, "lm_checkpoint");
    require(out_dir, "out_dir");
    if (n_seconds > 0) require(seconds, "seconds");
    const auto config = auscqa::TrainConfig::from_json(parse_config(train_config_json));
    const auto records = auscqa::read_manifest(manifest_path);
    const auto lm = auscqa::load_checkpoint(lm_checkpoint);
    const auto rows = auscqa::ablate_context(
        config, records, data_root(data_root_dir, manifest_path), lm,
        std::span<const double>(seconds, n_seconds), out_dir, str(reuse_dir),
        log_adapter(on_log, user));
    put(result_json,
        json{{"rows", auscqa::ablation_json(rows)}, {"table", auscqa::ablation_table(rows)}}
            .dump());
  });
}

auscqa_status auscqa_model_load(const char* checkpoint, auscqa_model** out) {
  return guarded([&] {
    require(checkpoint, "checkpoint");
    require(out, "out");
    *out = nullptr;
    *out = new auscqa_model{auscqa::AudioQAModel::load(checkpoint)};
  });
}

void auscqa_model_free(auscqa_model* model) { delete model; }

auscqa_status auscqa_model_answer(const auscqa_model* model, const char* clips_json,
                                  const char* data_root_dir, const char* question,
                                  int use_audio, char** answer_json) {
  return guarded([&] {
    require(model, "model");
    require(clips_json, "clips_json");
    require(question, "question");
    const json clips = parse_config(clips_json);
    if (!clips.is_array() || clips.empty()) {
      auscqa::fail(ErrorKind::kUsage, "clips_json must be a non-empty array of {path, site}");
    }
    auscqa::PatientRecord rec;
    rec.patient_id = "query";
    for (const auto& c : clips) {
      rec.clips.push_back({c.at("path").get<std::string>(), c.at("site").get<std::string>()});
    }
    const auto& m = model->model;
    const auto wavs = auscqa::load_patient_clips(rec, str(data_root_dir),
                                                 m.config().max_seconds);
    std::vector<std::string> sites, ids;
    for (const auto& c : rec.clips) {
      sites.push_back(c.site);
      ids.push_back(auscqa::clip_id(c));
    }
    auscqa::Prompt prompt;
    std::string answer;
    if (use_audio != 0) {
      const auto z = m.encode_bag(wavs, ids);
      answer = m.answer(&z, sites, question, &prompt);
    } else {
      answer = m.answer(nullptr, sites, question, &prompt);
    }
    put(answer_json, json{{"answer", answer},
                          {"prompt", m.vocab().decode(prompt.ids)},
                          {"prompt_ids", prompt.ids}}
                         .dump());
  });
}

auscqa_status auscqa_evaluate(const char* predictions_path, const char* config_json,
                              char** report_json, char** table) {
  return guarded([&] {
    require(predictions_path, "predictions_path");
    const json cfg = parse_config(config_json);
    auscqa::internal::check_keys(cfg, {"embed_dim", "embed_seed"}, "eval config");
    const auscqa::HashEmbedder embedder(cfg.value("embed_dim", std::size_t{64}),
                                        cfg.value("embed_seed", std::uint64_t{0}));
    const auto report = auscqa::evaluate(auscqa::read_predictions(predictions_path), &embedder);
    put(report_json, report.to_json().dump());
    put(table, report.to_table());
  });
}

}  // extern "C"
