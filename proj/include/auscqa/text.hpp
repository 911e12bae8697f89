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

// Word-level vocabulary and prompt assembly.

#ifndef AUSCQA_TEXT_HPP_
#define AUSCQA_TEXT_HPP_

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace auscqa {

inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kAudioId = 3;
inline constexpr int kUnkId = 4;
inline constexpr int kNumSpecials = 5;

inline constexpr const char* kAudioToken = "<audio>";
inline constexpr const char* kInstruction =
    "listen to the auscultation recordings and answer the question .";

// Lowercases and splits on ASCII whitespace.
std::vector<std::string> split_words(std::string_view text);

class TextVocab {
 public:
  // Keeps words seen at least `min_freq` times, ordered by descending
  // frequency then lexicographically, after the five reserved specials.
  static TextVocab build(std::span<const std::string> corpus, std::size_t min_freq = 2);
  // Rebuilds from a persisted id-ordered word list (specials included).
  static TextVocab from_words(std::vector<std::string> words);

  int id(std::string_view word) const;
  const std::string& word(int id) const;
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  std::vector<int> encode(std::string_view text) const;
  // Joins words with single spaces, dropping PAD/BOS/EOS.
  std::string decode(std::span<const int> ids) const;

 private:
  std::vector<std::string> words_;
  std::map<std::string, int, std::less<>> ids_;
};

struct Prompt {
  std::vector<int> ids;
  // Index of the first answer token: the prompt ends just past "answer:".
  std::size_t answer_start = 0;
};

// BOS, instruction, then "<audio> <site>" per clip in order, then
// "question: {question} answer:".
std::string prompt_text(std::span<const std::string> sites, std::string_view question);
Prompt assemble_prompt(const TextVocab& vocab, std::span<const std::string> sites,
                       std::string_view question, std::size_t max_seq);

// Prompt followed by the answer words and EOS (the training sequence).
Prompt assemble_example(const TextVocab& vocab, std::span<const std::string> sites,
                        std::string_view question, std::string_view answer,
                        std::size_t max_seq);

}  // namespace auscqa

#endif  // AUSCQA_TEXT_HPP_
