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

// M.F. Porter, "An algorithm for suffix stripping", Program 14(3), 1980.
// Each rule list is ordered so that the first suffix match decides the
// step, whether or not its measure condition holds.

#include <array>
#include <string>
#include <string_view>
#include <utility>

#include "auscqa/eval.hpp"

namespace auscqa {
namespace {

using Rule = std::pair<std::string_view, std::string_view>;

bool is_consonant(const std::string& w, std::size_t i) {
  switch (w[i]) {
    case 'a': case 'e': case 'i': case 'o': case 'u': return false;
    case 'y': return i == 0 || !is_consonant(w, i - 1);
    default: return true;
  }
}

// Number of VC sequences in w[0, len).
int measure(const std::string& w, std::size_t len) {
  int m = 0;
  std::size_t i = 0;
  while (i < len && is_consonant(w, i)) ++i;
  while (i < len) {
    while (i < len && !is_consonant(w, i)) ++i;
    if (i >= len) break;
    while (i < len && is_consonant(w, i)) ++i;
    ++m;
  }
  return m;
}

bool has_vowel(const std::string& w, std::size_t len) {
  for (std::size_t i = 0; i < len; ++i)
    if (!is_consonant(w, i)) return true;
  return false;
}

bool double_consonant(const std::string& w, std::size_t len) {
  return len >= 2 && w[len - 1] == w[len - 2] && is_consonant(w, len - 1);
}

// Stem w[0, len) ends consonant-vowel-consonant, last not w, x or y.
bool cvc(const std::string& w, std::size_t len) {
  if (len < 3) return false;
  if (!is_consonant(w, len - 1) || is_consonant(w, len - 2) || !is_consonant(w, len - 3)) {
    return false;
  }
  const char c = w[len - 1];
  return c != 'w' && c != 'x' && c != 'y';
}

bool ends_with(const std::string& w, std::string_view s) {
  return w.size() >= s.size() && w.compare(w.size() - s.size(), s.size(), s) == 0;
}

void replace_tail(std::string& w, std::size_t suffix_len, std::string_view with) {
  w.resize(w.size() - suffix_len);
  w.append(with);
}

// Applies the first matching rule when measure(stem) > min_m.
template <std::size_t N>
void apply_rules(std::string& w, const std::array<Rule, N>& rules, int min_m) {
  for (const auto& [suffix, repl] : rules) {
    if (!ends_with(w, suffix)) continue;
    if (measure(w, w.size() - suffix.size()) > min_m) replace_tail(w, suffix.size(), repl);
    return;
  }
}

void step1ab(std::string& w) {
  if (ends_with(w, "sses")) {
    replace_tail(w, 4, "ss");
  } else if (ends_with(w, "ies")) {
    replace_tail(w, 3, "i");
  } else if (!ends_with(w, "ss") && ends_with(w, "s")) {
    w.pop_back();
  }

  if (ends_with(w, "eed")) {
    if (measure(w, w.size() - 3) > 0) w.pop_back();
    return;
  }
  std::size_t cut = 0;
  if (ends_with(w, "ed") && has_vowel(w, w.size() - 2)) cut = 2;
  else if (ends_with(w, "ing") && has_vowel(w, w.size() - 3)) cut = 3;
  if (cut == 0) return;
  w.resize(w.size() - cut);
  if (ends_with(w, "at") || ends_with(w, "bl") || ends_with(w, "iz")) {
    w.push_back('e');
  } else if (double_consonant(w, w.size())) {
    const char c = w.back();
    if (c != 'l' && c != 's' && c != 'z') w.pop_back();
  } else if (measure(w, w.size()) == 1 && cvc(w, w.size())) {
    w.push_back('e');
  }
}

void step1c(std::string& w) {
  if (ends_with(w, "y") && has_vowel(w, w.size() - 1)) w.back() = 'i';
}

void step2(std::string& w) {
  static constexpr std::array<Rule, 20> kRules = {{
      {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"}, {"anci", "ance"},
      {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},   {"entli", "ent"},
      {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
      {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
      {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},   {"biliti", "ble"},
  }};
  apply_rules(w, kRules, 0);
}

void step3(std::string& w) {
  static constexpr std::array<Rule, 7> kRules = {{
      {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
      {"ical", "ic"},  {"ful", ""},   {"ness", ""},
  }};
  apply_rules(w, kRules, 0);
}

void step4(std::string& w) {
  static constexpr std::array<std::string_view, 18> kSuffixes = {
      "al",  "ance", "ence", "er",  "ic",  "able", "ible", "ant", "ement",
      "ment", "ent", "ou",   "ism", "ate", "iti",  "ous",  "ive", "ize"};
  for (std::string_view s : kSuffixes) {
    if (!ends_with(w, s)) continue;
    // "ement" and "ment" shadow "ent" even when their condition fails.
    if (measure(w, w.size() - s.size()) > 1) w.resize(w.size() - s.size());
    return;
  }
  if (ends_with(w, "ion") && w.size() >= 4) {
    const char c = w[w.size() - 4];
    if ((c == 's' || c == 't') && measure(w, w.size() - 3) > 1) w.resize(w.size() - 3);
  }
}

void step5(std::string& w) {
  if (ends_with(w, "e")) {
    const int m = measure(w, w.size() - 1);
    if (m > 1 || (m == 1 && !cvc(w, w.size() - 1))) w.pop_back();
  }
  if (ends_with(w, "ll") && measure(w, w.size()) > 1) w.pop_back();
}

}  // namespace

std::string porter_stem(std::string_view word) {
  std::string w(word);
  if (w.size() <= 2) return w;
  step1ab(w);
  step1c(w);
  step2(w);
  step3(w);
  step4(w);
  step5(w);
  return w;
}

}  // namespace auscqa
