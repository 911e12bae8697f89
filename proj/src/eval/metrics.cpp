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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "auscqa/error.hpp"
#include "auscqa/eval.hpp"

namespace auscqa {
namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

double ratio(double num, double den, bool& zero_division) {
  if (den == 0.0) {
    zero_division = true;
    return 0.0;
  }
  return num / den;
}

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

std::string normalize_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      pending_space = true;
    } else if (std::isalnum(c) || c >= 0x80) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    }
    // Remaining ASCII punctuation is dropped.
  }
  return out;
}

std::vector<std::string> normalized_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in(normalize_text(s));
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

bool contains_match(std::string_view gold, std::string_view hyp) {
  const std::string g = normalize_text(gold);
  if (g.empty()) fail(ErrorKind::kData, "contains_match: gold answer is empty");
  return normalize_text(hyp).find(g) != std::string::npos;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_f1(std::string_view gold, std::string_view hyp) {
  const auto g = normalized_tokens(gold), h = normalized_tokens(hyp);
  if (g.empty() || h.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(g, h));
  return harmonic(lcs / static_cast<double>(h.size()), lcs / static_cast<double>(g.size()));
}

MeteorDetail meteor_detail(std::string_view gold, std::string_view hyp,
                           const MeteorParams& params) {
  const auto g = normalized_tokens(gold), h = normalized_tokens(hyp);
  MeteorDetail d;
  if (g.empty() || h.empty()) return d;

  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> align(h.size(), kNone);
  std::vector<char> gold_used(g.size(), 0);
  const auto run_stage = [&](const std::vector<std::string>& gk, const std::vector<std::string>& hk) {
    std::size_t prev = kNone;
    for (std::size_t i = 0; i < h.size(); ++i) {
      if (align[i] != kNone) {
        prev = align[i];
        continue;
      }
      std::size_t pick = kNone;
      if (prev != kNone && prev + 1 < g.size() && !gold_used[prev + 1] && gk[prev + 1] == hk[i]) {
        pick = prev + 1;
      } else {
        for (std::size_t j = 0; j < g.size(); ++j) {
          if (!gold_used[j] && gk[j] == hk[i]) {
            pick = j;
            break;
          }
        }
      }
      if (pick != kNone) {
        align[i] = pick;
        gold_used[pick] = 1;
      }
      prev = pick;
    }
  };
  run_stage(g, h);
  std::vector<std::string> gs, hs;
  for (const auto& w : g) gs.push_back(porter_stem(w));
  for (const auto& w : h) hs.push_back(porter_stem(w));
  run_stage(gs, hs);

  std::size_t last = kNone;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (align[i] == kNone) {
      last = kNone;
      continue;
    }
    ++d.matches;
    if (last == kNone || align[i] != last + 1) ++d.chunks;
    last = align[i];
  }
  if (d.matches == 0) return d;
  const double m = static_cast<double>(d.matches);
  d.precision = m / static_cast<double>(h.size());
  d.recall = m / static_cast<double>(g.size());
  d.fmean = d.precision * d.recall /
            (params.alpha * d.precision + (1.0 - params.alpha) * d.recall);
  d.penalty = params.gamma * std::pow(static_cast<double>(d.chunks) / m, params.beta);
  d.score = d.fmean * (1.0 - d.penalty);
  return d;
}

double meteor(std::string_view gold, std::string_view hyp, const MeteorParams& params) {
  return meteor_detail(gold, hyp, params).score;
}

std::vector<double> HashEmbedder::embed(const std::string& token) const {
  if (dim_ == 0) fail(ErrorKind::kUsage, "HashEmbedder: dimension must be positive");
  std::seed_seq seq{static_cast<std::uint32_t>(fnv1a(token)),
                    static_cast<std::uint32_t>(fnv1a(token) >> 32),
                    static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim_);
  double norm = 0.0;
  for (double& x : v) {
    x = normal(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

double embed_score(std::string_view gold, std::string_view hyp, const TokenEmbedder* embedder) {
  if (embedder == nullptr) fail(ErrorKind::kUsage, "embed_score: no embedder available");
  const auto g = normalized_tokens(gold), h = normalized_tokens(hyp);
  if (g.empty() || h.empty()) return 0.0;
  const auto embed_all = [&](const std::vector<std::string>& toks) {
    std::vector<std::vector<double>> out;
    out.reserve(toks.size());
    for (const auto& t : toks) {
      out.push_back(embedder->embed(t));
      if (out.back().size() != embedder->dim()) fail(ErrorKind::kData, "embedder returned wrong width");
    }
    return out;
  };
  const auto ge = embed_all(g), he = embed_all(h);
  std::vector<std::vector<double>> sim(h.size(), std::vector<double>(g.size()));
  for (std::size_t i = 0; i < h.size(); ++i) {
    for (std::size_t j = 0; j < g.size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < embedder->dim(); ++k) s += he[i][k] * ge[j][k];
      sim[i][j] = s;
    }
  }
  double p = 0.0, r = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) p += *std::max_element(sim[i].begin(), sim[i].end());
  for (std::size_t j = 0; j < g.size(); ++j) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < h.size(); ++i) best = std::max(best, sim[i][j]);
    r += best;
  }
  p /= static_cast<double>(h.size());
  r /= static_cast<double>(g.size());
  if (p <= 0.0 || r <= 0.0) return 0.0;
  return std::min(1.0, harmonic(p, r));
}

std::optional<bool> extract_yes_no(std::string_view text) {
  for (const auto& t : normalized_tokens(text)) {
    if (t == "yes") return true;
    if (t == "no") return false;
  }
  return std::nullopt;
}

void BinaryCounts::add(const BinaryCounts& o) {
  yy += o.yy;
  yn += o.yn;
  yu += o.yu;
  ny += o.ny;
  nn += o.nn;
  nu += o.nu;
}

BinaryMetrics binary_metrics_from_counts(const BinaryCounts& c) {
  BinaryMetrics m;
  m.counts = c;
  bool z = false;
  const double yy = static_cast<double>(c.yy), nn = static_cast<double>(c.nn);
  const double gold_yes = static_cast<double>(c.yy + c.yn + c.yu);
  const double gold_no = static_cast<double>(c.ny + c.nn + c.nu);
  const double pred_yes = static_cast<double>(c.yy + c.ny);
  const double pred_no = static_cast<double>(c.nn + c.yn);
  m.accuracy = ratio(yy + nn, static_cast<double>(c.total()), z);
  m.sensitivity = ratio(yy, gold_yes, z);
  m.specificity = ratio(nn, gold_no, z);
  const double f1_yes = harmonic(ratio(yy, pred_yes, z), m.sensitivity);
  const double f1_no = harmonic(ratio(nn, pred_no, z), m.specificity);
  m.f1_macro = 0.5 * (f1_yes + f1_no);
  m.zero_division = z;
  return m;
}

BinaryMetrics binary_metrics(std::span<const Prediction> preds) {
  BinaryCounts c;
  for (const auto& p : preds) {
    if (p.kind != QAKind::kBinary) {
      fail(ErrorKind::kData, "binary_metrics: open prediction for patient " + p.patient_id);
    }
    const std::string g = normalize_text(p.gold);
    if (g != "yes" && g != "no") {
      fail(ErrorKind::kData, "binary gold must be yes or no, got '" + p.gold + "'");
    }
    const auto h = extract_yes_no(p.hyp);
    if (g == "yes") {
      (!h ? c.yu : *h ? c.yy : c.yn) += 1;
    } else {
      (!h ? c.nu : *h ? c.ny : c.nn) += 1;
    }
  }
  return binary_metrics_from_counts(c);
}

}  // namespace auscqa
