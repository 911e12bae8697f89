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

// auscqa command-line front end over the C API.
//
// Exit codes: 0 success, 1 usage error, 2 data, I/O or runtime error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "auscqa/auscqa.h"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr const char* kDataRootEnv = "AUSCQA_DATA_ROOT";

// Raised by command handlers; carries the exit code.
struct CommandError {
  int code;
  std::string message;
};

[[noreturn]] void usage_error(const std::string& msg) { throw CommandError{kExitUsage, msg}; }

void check(auscqa_status s) {
  if (s == AUSCQA_OK) return;
  throw CommandError{s == AUSCQA_ERR_USAGE ? kExitUsage : kExitData, auscqa_last_error()};
}

// Owns a string returned by the library.
struct Owned {
  char* p = nullptr;
  ~Owned() { auscqa_string_free(p); }
  std::string str() const { return p == nullptr ? std::string() : std::string(p); }
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw CommandError{kExitData, "cannot open config " + path};
  try {
    json j = json::parse(in);
    if (!j.is_object()) usage_error("config " + path + " must hold a JSON object");
    return j;
  } catch (const json::exception& e) {
    usage_error("config " + path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw CommandError{kExitData, "cannot write " + path};
  out << text;
  if (!out) throw CommandError{kExitData, "short write to " + path};
}

// Manifest path for a --data argument naming a directory or a file.
std::string manifest_of(const std::string& data) {
  const fs::path p(data);
  return fs::is_directory(p) ? (p / "manifest.jsonl").string() : p.string();
}

// Clip root: the environment override, else the manifest's directory.
std::string data_root(const std::string& manifest) {
  if (const char* env = std::getenv(kDataRootEnv); env != nullptr && *env != '\0') return env;
  return fs::path(manifest).parent_path().string();
}

void print_log(const char* record, void*) {
  const json r = json::parse(record);
  std::fprintf(stderr, "step %4d epoch %3d %-5s loss %.4f\n", r.at("step").get<int>(),
               r.at("epoch").get<int>(), r.at("split").get<std::string>().c_str(),
               r.at("loss").get<double>());
}

std::vector<double> parse_seconds(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      usage_error("bad --seconds entry '" + item + "'");
    }
  }
  if (out.empty()) usage_error("--seconds needs at least one value");
  return out;
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c, const std::string& config_help) {
  cmd->add_option("--config", c.config, config_help)->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Random seed (overrides the config)");
}

// Training config with --seed applied.
json train_config(const Common& c) {
  json cfg = load_config(c.config);
  if (c.seed) cfg["seed"] = *c.seed;
  return cfg;
}

std::string lm_for_run(const std::string& lm, const json& cfg, const std::string& manifest,
                       const std::string& out_dir) {
  if (!lm.empty()) return lm;
  fs::create_directories(out_dir);
  const std::string path = (fs::path(out_dir) / "text_lm.ckpt").string();
  std::fprintf(stderr, "pretraining the text LM into %s\n", path.c_str());
  check(auscqa_pretrain_lm(cfg.dump().c_str(), manifest.c_str(), path.c_str()));
  return path;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-clip auscultation question answering"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(auscqa_version()));

  Common synth_c, pre_c, lm_c, train_c, infer_c, eval_c, ablate_c;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  add_common(synth, synth_c, "Synthetic corpus spec (JSON)");
  std::optional<std::size_t> patients;
  std::string synth_out;
  synth->add_option("--patients", patients, "Number of patients (overrides the config)");
  synth->add_option("--out", synth_out, "Output directory")->required();

  auto* pre = app.add_subcommand("preprocess", "Preprocess one WAV recording to a clip file");
  add_common(pre, pre_c, "JSON with optional max_seconds and site");
  std::string pre_in, pre_out, pre_site;
  std::optional<double> pre_seconds;
  pre->add_option("--in", pre_in, "Input WAV")->required()->check(CLI::ExistingFile);
  pre->add_option("--out", pre_out, "Output clip file")->required();
  pre->add_option("--site", pre_site, "Auscultation site label");
  pre->add_option("--max-seconds", pre_seconds, "Truncation length in seconds (default 30)");

  auto* plm = app.add_subcommand("pretrain-lm", "Pretrain the text decoder on QA text");
  add_common(plm, lm_c, "Training config (JSON)");
  std::string lm_data, lm_out;
  plm->add_option("--data", lm_data, "Corpus directory or manifest")->required();
  plm->add_option("--out", lm_out, "Output checkpoint")->required();

  auto* tr = app.add_subcommand("train", "Train encoder and adapters, then evaluate");
  add_common(tr, train_c, "Training config (JSON)");
  std::string tr_data, tr_out, tr_lm;
  tr->add_option("--data", tr_data, "Corpus directory or manifest")->required();
  tr->add_option("--out", tr_out, "Run directory")->required();
  tr->add_option("--lm", tr_lm, "Pretrained text LM (pretrained into the run if absent)");

  auto* inf = app.add_subcommand("infer", "Answer a question about one patient");
  add_common(inf, infer_c, "JSON with optional question, clips and no_audio");
  std::string inf_model, inf_question, inf_root;
  std::vector<std::string> inf_clips;
  bool no_audio = false;
  inf->add_option("--model", inf_model, "Audio QA checkpoint")->required()->check(CLI::ExistingFile);
  inf->add_option("--clip", inf_clips, "Clip as SITE=PATH (repeatable)");
  inf->add_option("--question", inf_question, "Question text");
  inf->add_option("--data-root", inf_root, "Directory clip paths are relative to");
  inf->add_flag("--no-audio", no_audio, "Answer with the text-only decoder");

  auto* ev = app.add_subcommand("eval", "Score a predictions file");
  add_common(ev, eval_c, "JSON with optional embed_dim and embed_seed");
  std::string ev_pred, ev_out;
  ev->add_option("--pred", ev_pred, "Predictions JSONL")->required()->check(CLI::ExistingFile);
  ev->add_option("--out", ev_out, "Report JSON path");

  auto* ab = app.add_subcommand("ablate", "Context-length ablation");
  add_common(ab, ablate_c, "Training config (JSON)");
  std::string ab_data, ab_out, ab_lm, ab_reuse, ab_seconds = "30,20,10";
  ab->add_option("--data", ab_data, "Corpus directory or manifest")->required();
  ab->add_option("--out", ab_out, "Output directory")->required();
  ab->add_option("--lm", ab_lm, "Pretrained text LM (pretrained if absent)");
  ab->add_option("--seconds", ab_seconds, "Comma-separated context lengths")->capture_default_str();
  ab->add_option("--reuse", ab_reuse, "Existing run directory to reuse when configs match");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (synth->parsed()) {
      json spec = load_config(synth_c.config);
      if (patients) spec["n_patients"] = *patients;
      if (synth_c.seed) spec["seed"] = *synth_c.seed;
      Owned summary;
      check(auscqa_synth(spec.dump().c_str(), synth_out.c_str(), &summary.p));
      std::cout << summary.str() << '\n';
    } else if (pre->parsed()) {
      const json cfg = load_config(pre_c.config);
      for (const auto& [key, value] : cfg.items()) {
        if (key != "max_seconds" && key != "site") usage_error("unknown preprocess key '" + key + "'");
      }
      const double seconds = pre_seconds.value_or(cfg.value("max_seconds", 30.0));
      const std::string site = pre_site.empty() ? cfg.value("site", std::string()) : pre_site;
      Owned info;
      check(auscqa_preprocess(pre_in.c_str(), site.c_str(), seconds, pre_out.c_str(), &info.p));
      std::cout << info.str() << '\n';
    } else if (plm->parsed()) {
      const json cfg = train_config(lm_c);
      check(auscqa_pretrain_lm(cfg.dump().c_str(), manifest_of(lm_data).c_str(), lm_out.c_str()));
      std::cout << lm_out << '\n';
    } else if (tr->parsed()) {
      const json cfg = train_config(train_c);
      const std::string manifest = manifest_of(tr_data);
      const std::string lm = lm_for_run(tr_lm, cfg, manifest, tr_out);
      Owned report;
      check(auscqa_train(cfg.dump().c_str(), manifest.c_str(), data_root(manifest).c_str(),
                         lm.c_str(), tr_out.c_str(), print_log, nullptr, &report.p));
      const json r = json::parse(report.str());
      for (const char* key : {"model", "gate_zero_baseline"}) {
        const json& o = r.at(key).at("overall");
        std::printf("%-20s acc %.4f  f1 %.4f  contains %.4f  rougeL %.4f  meteor %.4f\n", key,
                    o.at("binary").at("accuracy").get<double>(),
                    o.at("binary").at("f1_macro").get<double>(),
                    o.at("contains_match").get<double>(), o.at("rouge_l").get<double>(),
                    o.at("meteor").get<double>());
      }
    } else if (inf->parsed()) {
      const json cfg = load_config(infer_c.config);
      for (const auto& [key, value] : cfg.items()) {
        if (key != "question" && key != "clips" && key != "no_audio") {
          usage_error("unknown infer key '" + key + "'");
        }
      }
      json clips = cfg.value("clips", json::array());
      for (const auto& c : inf_clips) {
        const auto eq = c.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == c.size()) {
          usage_error("--clip expects SITE=PATH, got '" + c + "'");
        }
        clips.push_back({{"site", c.substr(0, eq)}, {"path", c.substr(eq + 1)}});
      }
      const std::string question =
          inf_question.empty() ? cfg.value("question", std::string()) : inf_question;
      if (question.empty()) usage_error("a question is required (--question or config)");
      if (clips.empty()) usage_error("at least one clip is required (--clip or config)");
      std::string root = inf_root;
      if (const char* env = std::getenv(kDataRootEnv); root.empty() && env != nullptr) root = env;
      const bool audio = !(no_audio || cfg.value("no_audio", false));
      auscqa_model* raw = nullptr;
      check(auscqa_model_load(inf_model.c_str(), &raw));
      const std::unique_ptr<auscqa_model, void (*)(auscqa_model*)> model(raw, auscqa_model_free);
      Owned answer;
      check(auscqa_model_answer(model.get(), clips.dump().c_str(), root.c_str(), question.c_str(),
                                audio ? 1 : 0, &answer.p));
      const json a = json::parse(answer.str());
      std::cout << "prompt: " << a.at("prompt").get<std::string>() << '\n'
                << "answer: " << a.at("answer").get<std::string>() << '\n';
    } else if (ev->parsed()) {
      json cfg = load_config(eval_c.config);
      if (eval_c.seed) cfg["embed_seed"] = *eval_c.seed;
      Owned report, table;
      check(auscqa_evaluate(ev_pred.c_str(), cfg.dump().c_str(), &report.p, &table.p));
      if (!ev_out.empty()) write_text(ev_out, json::parse(report.str()).dump(2) + "\n");
      std::cout << table.str();
    } else if (ab->parsed()) {
      const json cfg = train_config(ablate_c);
      const std::vector<double> seconds = parse_seconds(ab_seconds);
      const std::string manifest = manifest_of(ab_data);
      const std::string lm = lm_for_run(ab_lm, cfg, manifest, ab_out);
      Owned result;
      check(auscqa_ablate(cfg.dump().c_str(), manifest.c_str(), data_root(manifest).c_str(),
                          lm.c_str(), seconds.data(), seconds.size(), ab_out.c_str(),
                          ab_reuse.c_str(), print_log, nullptr, &result.p));
      const json r = json::parse(result.str());
      write_text((fs::path(ab_out) / "ablation.json").string(), r.at("rows").dump(2) + "\n");
      std::cout << r.at("table").get<std::string>();
    }
  } catch (const CommandError& e) {
    std::fprintf(stderr, "error: %s\n", e.message.c_str());
    return e.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return 0;
}
