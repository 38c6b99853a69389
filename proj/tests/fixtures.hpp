#pragma once

#include <string>
#include <vector>

#include "dd/corpus.hpp"

namespace ddtest {

// `ai` AI and `human` human samples for each named category. Texts are short
// deterministic word lists so the toy encoder has something to hash.
inline dd::Corpus make_corpus(const std::vector<std::string>& categories, std::size_t ai, std::size_t human) {
  static const char* words[] = {"alpha", "beta", "gamma", "delta", "river", "stone", "cloud", "paper", "light", "moss"};
  std::vector<dd::Sample> samples;
  for (const auto& cat : categories) {
    for (std::size_t i = 0; i < ai + human; ++i) {
      dd::Sample s;
      s.y = i < ai ? 1 : 0;
      s.id = cat + "-" + (s.y ? "ai-" : "hu-") + std::to_string(i);
      s.s = cat;
      for (std::size_t w = 0; w < 6 + i % 5; ++w) {
        if (w) s.text += ' ';
        s.text += words[(i * 7 + w * 3 + (s.y ? 1 : 0)) % 10];
      }
      if (s.y) s.text += " indeed";
      samples.push_back(std::move(s));
    }
  }
  return dd::Corpus(std::move(samples));
}

inline std::vector<std::string> seven_categories() {
  return {"gpt", "opt", "flan_t5", "llama", "bloom", "glm", "gpt_neox"};
}

}  // namespace ddtest
