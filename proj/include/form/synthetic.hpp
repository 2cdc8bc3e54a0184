// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "form/data.hpp"

namespace form {

// Desk-scale corpus with a planted signal: a known subset of each thread's
// responses carries class-correlated tokens, the rest is uniform noise.
// Class tokens are named "s<class>x<j>" (e.g. "s2x0"), filler tokens
// "w<j>"; a bag-of-words reading of the signal responses recovers the label.
struct SyntheticSpec {
  int n_threads = 40;          // must be divisible by 4 (exact label balance)
  int responses_per_thread = 10;
  int n_signal_responses = 3;
  int vocab_size = 50;
  double signal_strength = 1.0;  // probability that the claim leaks one class token
  std::uint64_t seed = 1;
  void validate() const;
};

struct SyntheticCorpus {
  std::vector<ConversationThread> threads;  // labels cycle 0,1,2,3,...
  // thread id -> positions of the signal responses within the thread
  std::map<std::string, std::vector<int>> signal_indices;
};

SyntheticCorpus generate(const SyntheticSpec& spec);

// Mean precision@k of selected response indices against the planted signal
// sets: |selected ∩ signal| / |selected| averaged over threads.
double selector_precision(const std::map<std::string, std::vector<int>>& selected,
                          const std::map<std::string, std::vector<int>>& signal_indices);

// Sidecar written next to the thread JSONL by `synth`.
void write_signals_json(const std::filesystem::path& path,
                        const std::map<std::string, std::vector<int>>& signal_indices);
std::map<std::string, std::vector<int>> read_signals_json(const std::filesystem::path& path);

}  // namespace form
