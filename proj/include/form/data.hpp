// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "form/common.hpp"

namespace form {

// Canonical 4-way veracity labels. The integer codes (0..3) are fixed
// project-wide; reports list per-class columns in this order.
enum class RumorLabel : int {
  kFalseRumor = 0,
  kTrueRumor = 1,
  kUnverified = 2,
  kNonRumor = 3,
};

inline constexpr int kNumClasses = 4;

std::string to_string(RumorLabel label);
RumorLabel label_from_string(const std::string& s);

struct ResponseTweet {
  std::string id;
  std::string text;
  std::optional<std::int64_t> timestamp;  // epoch seconds
};

struct Claim {
  std::string id;
  std::string text;
  std::optional<std::string> image_path;
};

struct ConversationThread {
  Claim claim;
  std::vector<ResponseTweet> responses;  // chronological
  RumorLabel label = RumorLabel::kNonRumor;
};

struct FoldSplit {
  int fold_index = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

// Fixed tensor dimensions every encoded thread conforms to.
struct PaddingPolicy {
  int max_responses = 100;  // N
  int max_tokens = 35;      // M
  int max_objects = 36;     // K
  void validate() const;
};

// Lowercased, whitespace-collapsed view used for retweet matching.
std::string normalize_text(const std::string& text);

// A response is a retweet iff its normalized text equals the claim's
// normalized text or it starts with the "RT @" marker.
bool is_retweet(const std::string& response_text, const std::string& claim_text);

// Drops retweets and whitespace-only responses; idempotent.
std::vector<ResponseTweet> filter_retweets(const std::vector<ResponseTweet>& responses,
                                           const std::string& claim_text);

// Reads a corpus in the thread-JSONL layout. `dataset` selects the file
// resolution rule: "twitter15" and "twitter16" look for <root>/<name>.jsonl
// or <root>/<name>/threads.jsonl; "custom" accepts a .jsonl file path or a
// directory containing threads.jsonl. Retweets are removed on load and
// image paths are resolved relative to the JSONL file and checked readable.
std::vector<ConversationThread> load_corpus(const std::filesystem::path& root,
                                            const std::string& dataset);

// Stratified k-fold assignment, deterministic under `seed`. Per-class
// membership per fold differs from the corpus proportion by at most one,
// and the test sets partition the corpus.
std::vector<FoldSplit> make_folds(const std::vector<ConversationThread>& threads,
                                  std::uint64_t seed, int n_folds = 5);

void write_folds(const std::filesystem::path& path, std::uint64_t seed,
                 const std::vector<FoldSplit>& folds);
std::vector<FoldSplit> read_folds(const std::filesystem::path& path);

// Thread clipped to the policy's response budget plus per-slot validity.
// slot_real has exactly max_responses entries; kept responses are the
// chronological prefix.
struct TruncatedThread {
  ConversationThread thread;
  std::vector<bool> slot_real;
};

TruncatedThread truncate_and_mark(ConversationThread thread, const PaddingPolicy& policy);

// Thread-JSONL serialization for one thread (used by `synth` and tests).
std::string thread_to_jsonl(const ConversationThread& thread);
void write_corpus_jsonl(const std::filesystem::path& path,
                        const std::vector<ConversationThread>& threads);

}  // namespace form
