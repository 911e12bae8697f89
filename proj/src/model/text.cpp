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

#include "auscqa/text.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>

#include "auscqa/error.hpp"

namespace auscqa {
namespace {

const std::vector<std::string>& special_words() {
  static const std::vector<std::string> kWords = {"<pad>", "<bos>", "<eos>", kAudioToken,
                                                  "<unk>"};
  return kWords;
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

TextVocab TextVocab::build(std::span<const std::string> corpus, std::size_t min_freq) {
  if (corpus.empty()) fail(ErrorKind::kData, "cannot build a vocabulary from an empty corpus");
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& line : corpus)
    for (auto& w : split_words(line)) ++freq[w];
  const auto& specials = special_words();
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [w, n] : freq) {
    if (n < min_freq) continue;
    if (std::find(specials.begin(), specials.end(), w) != specials.end()) continue;
    kept.emplace_back(w, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> words = specials;
  for (auto& [w, n] : kept) words.push_back(w);
  return from_words(std::move(words));
}

TextVocab TextVocab::from_words(std::vector<std::string> words) {
  const auto& specials = special_words();
  if (words.size() < specials.size() ||
      !std::equal(specials.begin(), specials.end(), words.begin())) {
    fail(ErrorKind::kData, "vocabulary does not start with the reserved specials");
  }
  TextVocab v;
  v.words_ = std::move(words);
  for (std::size_t i = 0; i < v.words_.size(); ++i) {
    if (!v.ids_.emplace(v.words_[i], static_cast<int>(i)).second) {
      fail(ErrorKind::kData, "duplicate vocabulary entry '" + v.words_[i] + "'");
    }
  }
  return v;
}

int TextVocab::id(std::string_view word) const {
  const auto it = ids_.find(word);
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& TextVocab::word(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size()) {
    fail(ErrorKind::kUsage, "token id " + std::to_string(id) + " out of range");
  }
  return words_[static_cast<std::size_t>(id)];
}

std::vector<int> TextVocab::encode(std::string_view text) const {
  std::vector<int> out;
  for (const auto& w : split_words(text)) out.push_back(id(w));
  return out;
}

std::string TextVocab::decode(std::span<const int> ids) const {
  std::string out;
  for (int i : ids) {
    if (i == kPadId || i == kBosId || i == kEosId) continue;
    if (!out.empty()) out.push_back(' ');
    out += word(i);
  }
  return out;
}

std::string prompt_text(std::span<const std::string> sites, std::string_view question) {
  std::string s = kInstruction;
  for (const auto& site : sites) {
    s += ' ';
    s += kAudioToken;
    s += ' ';
    s += site;
  }
  s += " question: ";
  s += question;
  s += " answer:";
  return s;
}

Prompt assemble_prompt(const TextVocab& vocab, std::span<const std::string> sites,
                       std::string_view question, std::size_t max_seq) {
  if (sites.empty()) fail(ErrorKind::kData, "prompt needs at least one clip");
  if (split_words(question).empty()) fail(ErrorKind::kData, "empty question");
  Prompt p;
  p.ids.push_back(kBosId);
  const auto body = vocab.encode(prompt_text(sites, question));
  p.ids.insert(p.ids.end(), body.begin(), body.end());
  p.answer_start = p.ids.size();
  if (p.ids.size() > max_seq) {
    fail(ErrorKind::kData, "prompt of " + std::to_string(p.ids.size()) +
                               " tokens exceeds max_seq " + std::to_string(max_seq));
  }
  return p;
}

Prompt assemble_example(const TextVocab& vocab, std::span<const std::string> sites,
                        std::string_view question, std::string_view answer,
                        std::size_t max_seq) {
  Prompt p = assemble_prompt(vocab, sites, question, max_seq);
  const auto ans = vocab.encode(answer);
  p.ids.insert(p.ids.end(), ans.begin(), ans.end());
  p.ids.push_back(kEosId);
  if (p.ids.size() > max_seq) {
    fail(ErrorKind::kData, "training sequence of " + std::to_string(p.ids.size()) +
                               " tokens exceeds max_seq " + std::to_string(max_seq));
  }
  return p;
}

}  // namespace auscqa
