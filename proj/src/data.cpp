// SPDX-License-Identifier: Apache-2.0
#include "form/data.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace form {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(RumorLabel label) {
  switch (label) {
    case RumorLabel::kFalseRumor: return "false";
    case RumorLabel::kTrueRumor: return "true";
    case RumorLabel::kUnverified: return "unverified";
    case RumorLabel::kNonRumor: return "non-rumor";
  }
  throw ParamError("invalid label code");
}

RumorLabel label_from_string(const std::string& s) {
  if (s == "false") return RumorLabel::kFalseRumor;
  if (s == "true") return RumorLabel::kTrueRumor;
  if (s == "unverified") return RumorLabel::kUnverified;
  if (s == "non-rumor") return RumorLabel::kNonRumor;
  throw ParseError("unknown label '" + s +
                   "'; valid labels: false, true, unverified, non-rumor");
}

void PaddingPolicy::validate() const {
  if (max_responses <= 0 || max_tokens <= 0 || max_objects <= 0) {
    throw ParamError("padding policy dimensions must be strictly positive");
  }
}

std::string normalize_text(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_space = true;  // leading whitespace is dropped
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

bool is_retweet(const std::string& response_text, const std::string& claim_text) {
  if (response_text.rfind("RT @", 0) == 0) return true;
  return normalize_text(response_text) == normalize_text(claim_text);
}

std::vector<ResponseTweet> filter_retweets(const std::vector<ResponseTweet>& responses,
                                           const std::string& claim_text) {
  std::vector<ResponseTweet> kept;
  kept.reserve(responses.size());
  for (const auto& r : responses) {
    if (normalize_text(r.text).empty()) continue;
    if (is_retweet(r.text, claim_text)) continue;
    kept.push_back(r);
  }
  return kept;
}

namespace {

fs::path resolve_corpus_file(const fs::path& root, const std::string& dataset) {
  if (!fs::exists(root)) {
    throw IoError("dataset root does not exist: " + root.string());
  }
  if (dataset == "twitter15" || dataset == "twitter16") {
    const fs::path flat = root / (dataset + ".jsonl");
    if (fs::exists(flat)) return flat;
    const fs::path nested = root / dataset / "threads.jsonl";
    if (fs::exists(nested)) return nested;
    throw IoError("no " + dataset + ".jsonl or " + dataset +
                  "/threads.jsonl under " + root.string());
  }
  if (dataset == "custom") {
    if (fs::is_regular_file(root)) return root;
    const fs::path nested = root / "threads.jsonl";
    if (fs::exists(nested)) return nested;
    throw IoError("no threads.jsonl under " + root.string());
  }
  throw ConfigError("unknown dataset '" + dataset +
                    "'; expected twitter15, twitter16 or custom");
}

ConversationThread parse_thread_line(const json& j, const fs::path& file, int line_no) {
  const auto where = [&] { return file.string() + ":" + std::to_string(line_no); };
  try {
    ConversationThread t;
    t.claim.id = j.at("id").get<std::string>();
    t.claim.text = j.at("claim_text").get<std::string>();
    if (j.contains("image") && !j.at("image").is_null()) {
      t.claim.image_path = j.at("image").get<std::string>();
    }
    t.label = label_from_string(j.at("label").get<std::string>());
    for (const auto& rj : j.at("responses")) {
      ResponseTweet r;
      r.id = rj.at("id").get<std::string>();
      r.text = rj.at("text").get<std::string>();
      if (rj.contains("ts") && !rj.at("ts").is_null()) {
        r.timestamp = rj.at("ts").get<std::int64_t>();
      }
      t.responses.push_back(std::move(r));
    }
    return t;
  } catch (const ParseError& e) {
    throw ParseError(where() + ": " + e.what());
  } catch (const json::exception& e) {
    throw ParseError(where() + ": " + e.what());
  }
}

}  // namespace

std::vector<ConversationThread> load_corpus(const fs::path& root, const std::string& dataset) {
  const fs::path file = resolve_corpus_file(root, dataset);
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());

  std::vector<ConversationThread> threads;
  std::set<std::string> seen_ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    ConversationThread t = parse_thread_line(j, file, line_no);
    if (!seen_ids.insert(t.claim.id).second) {
      throw ParseError(file.string() + ":" + std::to_string(line_no) +
                       ": duplicate thread id '" + t.claim.id + "'");
    }
    t.responses = filter_retweets(t.responses, t.claim.text);
    if (t.claim.image_path) {
      fs::path img(*t.claim.image_path);
      if (img.is_relative()) img = file.parent_path() / img;
      std::ifstream probe(img, std::ios::binary);
      if (!probe) {
        throw IoError(file.string() + ":" + std::to_string(line_no) +
                      ": image not readable: " + img.string());
      }
      t.claim.image_path = img.string();
    }
    threads.push_back(std::move(t));
  }
  return threads;
}

std::vector<FoldSplit> make_folds(const std::vector<ConversationThread>& threads,
                                  std::uint64_t seed, int n_folds) {
  if (n_folds < 2) throw ParamError("need at least 2 folds");
  if (static_cast<int>(threads.size()) < n_folds) {
    throw ParamError("need at least " + std::to_string(n_folds) + " threads for " +
                     std::to_string(n_folds) + "-fold splits, got " +
                     std::to_string(threads.size()));
  }

  // Group ids by label, shuffle each group, then deal everything onto a
  // single rotating fold cursor. That keeps per-class counts within one of
  // proportional and total test sizes within one of each other.
  std::array<std::vector<std::string>, kNumClasses> by_label;
  for (const auto& t : threads) {
    by_label[static_cast<int>(t.label)].push_back(t.claim.id);
  }
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::string>> test_sets(static_cast<std::size_t>(n_folds));
  int cursor = 0;
  for (auto& group : by_label) {
    std::shuffle(group.begin(), group.end(), rng);
    for (auto& id : group) {
      test_sets[static_cast<std::size_t>(cursor)].push_back(std::move(id));
      cursor = (cursor + 1) % n_folds;
    }
  }

  std::vector<FoldSplit> folds;
  for (int f = 0; f < n_folds; ++f) {
    FoldSplit split;
    split.fold_index = f;
    split.test_ids = test_sets[static_cast<std::size_t>(f)];
    const std::set<std::string> test_lookup(split.test_ids.begin(), split.test_ids.end());
    for (const auto& t : threads) {
      if (!test_lookup.count(t.claim.id)) split.train_ids.push_back(t.claim.id);
    }
    folds.push_back(std::move(split));
  }
  return folds;
}

void write_folds(const fs::path& path, std::uint64_t seed, const std::vector<FoldSplit>& folds) {
  json j;
  j["seed"] = seed;
  j["folds"] = json::array();
  for (const auto& f : folds) {
    j["folds"].push_back({{"train", f.train_ids}, {"test", f.test_ids}});
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

std::vector<FoldSplit> read_folds(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  std::vector<FoldSplit> folds;
  int idx = 0;
  for (const auto& fj : j.at("folds")) {
    FoldSplit f;
    f.fold_index = idx++;
    f.train_ids = fj.at("train").get<std::vector<std::string>>();
    f.test_ids = fj.at("test").get<std::vector<std::string>>();
    folds.push_back(std::move(f));
  }
  return folds;
}

TruncatedThread truncate_and_mark(ConversationThread thread, const PaddingPolicy& policy) {
  policy.validate();
  const std::size_t n = static_cast<std::size_t>(policy.max_responses);
  if (thread.responses.size() > n) thread.responses.resize(n);
  std::vector<bool> slot_real(n, false);
  for (std::size_t i = 0; i < thread.responses.size(); ++i) slot_real[i] = true;
  return TruncatedThread{std::move(thread), std::move(slot_real)};
}

std::string thread_to_jsonl(const ConversationThread& thread) {
  json j;
  j["id"] = thread.claim.id;
  j["claim_text"] = thread.claim.text;
  j["image"] = thread.claim.image_path ? json(*thread.claim.image_path) : json(nullptr);
  j["label"] = to_string(thread.label);
  j["responses"] = json::array();
  for (const auto& r : thread.responses) {
    j["responses"].push_back({{"id", r.id},
                              {"text", r.text},
                              {"ts", r.timestamp ? json(*r.timestamp) : json(nullptr)}});
  }
  return j.dump();
}

void write_corpus_jsonl(const fs::path& path, const std::vector<ConversationThread>& threads) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& t : threads) out << thread_to_jsonl(t) << "\n";
}

}  // namespace form
