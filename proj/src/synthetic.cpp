// SPDX-License-Identifier: Apache-2.0
#include "form/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace form {

using nlohmann::json;

void SyntheticSpec::validate() const {
  if (n_threads <= 0 || n_threads % kNumClasses != 0) {
    throw ParamError("n_threads must be a positive multiple of " + std::to_string(kNumClasses));
  }
  if (responses_per_thread < 0) throw ParamError("responses_per_thread must be >= 0");
  if (n_signal_responses < 0 || n_signal_responses > responses_per_thread) {
    throw ParamError("n_signal_responses must be in [0, responses_per_thread]");
  }
  if (vocab_size < 1) throw ParamError("vocab_size must be >= 1");
  if (signal_strength < 0.0 || signal_strength > 1.0) {
    throw ParamError("signal_strength must be in [0, 1]");
  }
}

namespace {

std::string class_token(int cls, int j) {
  return "s" + std::to_string(cls) + "x" + std::to_string(j);
}

std::string filler_token(std::mt19937_64& rng, int vocab_size) {
  std::uniform_int_distribution<int> pick(0, vocab_size - 1);
  return "w" + std::to_string(pick(rng));
}

constexpr int kClassTokenVariants = 4;
constexpr int kSignalTokensPerResponse = 4;
constexpr int kFillerTokensPerResponse = 2;
constexpr int kClaimTokens = 3;
// Distractor tokens are label-independent noise drawn over the full
// vocabulary, class tokens included: a distractor may mention any class
// uniformly at random. That is what makes unfiltered aggregation lossy
// while the signal responses alone stay fully label-informative.
constexpr double kDistractorClassTokenRate = 0.3;

std::string distractor_token(std::mt19937_64& rng, int vocab_size) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < kDistractorClassTokenRate) {
    std::uniform_int_distribution<int> cls(0, kNumClasses - 1);
    std::uniform_int_distribution<int> var(0, kClassTokenVariants - 1);
    return class_token(cls(rng), var(rng));
  }
  return filler_token(rng, vocab_size);
}

}  // namespace

SyntheticCorpus generate(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> variant(0, kClassTokenVariants - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SyntheticCorpus corpus;
  for (int i = 0; i < spec.n_threads; ++i) {
    const int cls = i % kNumClasses;
    ConversationThread t;
    t.claim.id = "synth-" + std::to_string(spec.seed) + "-" + std::to_string(i);
    t.label = static_cast<RumorLabel>(cls);

    // Claim: filler with an optional single leaked class token.
    std::ostringstream claim;
    for (int w = 0; w < kClaimTokens; ++w) {
      if (w) claim << ' ';
      claim << filler_token(rng, spec.vocab_size);
    }
    if (unit(rng) < spec.signal_strength) {
      claim << ' ' << class_token(cls, variant(rng));
    }
    t.claim.text = claim.str();

    // Responses: signal positions drawn without replacement.
    std::vector<int> positions(static_cast<std::size_t>(spec.responses_per_thread));
    std::iota(positions.begin(), positions.end(), 0);
    std::shuffle(positions.begin(), positions.end(), rng);
    std::vector<int> signal(positions.begin(), positions.begin() + spec.n_signal_responses);
    std::sort(signal.begin(), signal.end());

    for (int r = 0; r < spec.responses_per_thread; ++r) {
      const bool is_signal = std::binary_search(signal.begin(), signal.end(), r);
      std::ostringstream text;
      if (is_signal) {
        for (int w = 0; w < kSignalTokensPerResponse; ++w) {
          if (w) text << ' ';
          text << class_token(cls, variant(rng));
        }
        for (int w = 0; w < kFillerTokensPerResponse; ++w) {
          text << ' ' << filler_token(rng, spec.vocab_size);
        }
      } else {
        for (int w = 0; w < kSignalTokensPerResponse + kFillerTokensPerResponse; ++w) {
          if (w) text << ' ';
          text << distractor_token(rng, spec.vocab_size);
        }
      }
      ResponseTweet resp;
      resp.id = t.claim.id + "-r" + std::to_string(r);
      resp.text = text.str();
      resp.timestamp = 1000 + r;
      t.responses.push_back(std::move(resp));
    }
    corpus.signal_indices[t.claim.id] = signal;
    corpus.threads.push_back(std::move(t));
  }
  return corpus;
}

double selector_precision(const std::map<std::string, std::vector<int>>& selected,
                          const std::map<std::string, std::vector<int>>& signal_indices) {
  if (selected.empty()) return 0.0;
  double sum = 0.0;
  int counted = 0;
  for (const auto& [id, sel] : selected) {
    auto it = signal_indices.find(id);
    if (it == signal_indices.end()) {
      throw ParamError("no signal record for thread '" + id + "'");
    }
    if (sel.empty()) continue;
    int hits = 0;
    for (int idx : sel) {
      if (std::find(it->second.begin(), it->second.end(), idx) != it->second.end()) ++hits;
    }
    sum += static_cast<double>(hits) / static_cast<double>(sel.size());
    ++counted;
  }
  return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

void write_signals_json(const std::filesystem::path& path,
                        const std::map<std::string, std::vector<int>>& signal_indices) {
  json j = json::object();
  for (const auto& [id, idxs] : signal_indices) j[id] = idxs;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

std::map<std::string, std::vector<int>> read_signals_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  std::map<std::string, std::vector<int>> out;
  for (auto& [key, value] : j.items()) out[key] = value.get<std::vector<int>>();
  return out;
}

}  // namespace form
