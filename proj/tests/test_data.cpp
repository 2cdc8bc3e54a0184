// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <fstream>
#include <map>
#include <random>
#include <set>

#include "form/data.hpp"
#include "test_support.hpp"

using namespace form;
using form::test::TempDir;

namespace {

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p);
  REQUIRE(out.good());
  out << content;
}

ConversationThread mk_thread(const std::string& id, RumorLabel label, int n_responses) {
  ConversationThread t;
  t.claim.id = id;
  t.claim.text = "claim text of " + id;
  t.label = label;
  for (int i = 0; i < n_responses; ++i) {
    t.responses.push_back({id + "-r" + std::to_string(i), "reply " + std::to_string(i),
                           1000 + i});
  }
  return t;
}

}  // namespace

TEST_CASE("labels: canonical codes and round trip") {
  CHECK(static_cast<int>(RumorLabel::kFalseRumor) == 0);
  CHECK(static_cast<int>(RumorLabel::kTrueRumor) == 1);
  CHECK(static_cast<int>(RumorLabel::kUnverified) == 2);
  CHECK(static_cast<int>(RumorLabel::kNonRumor) == 3);
  for (int c = 0; c < kNumClasses; ++c) {
    const auto l = static_cast<RumorLabel>(c);
    CHECK(label_from_string(to_string(l)) == l);
  }
  CHECK_THROWS_WITH_AS(label_from_string("bogus"),
                       doctest::Contains("false, true, unverified, non-rumor"), ParseError);
}

TEST_CASE("retweet filter: markers, normalization and idempotence") {
  CHECK(normalize_text("  Hello   WORLD \t") == "hello world");
  CHECK(is_retweet("RT @user: anything at all", "claim"));
  CHECK(is_retweet("The CLAIM   text", "the claim text"));
  CHECK(!is_retweet("a genuine reply", "the claim text"));

  std::vector<ResponseTweet> rs = {
      {"1", "RT @u: the claim text", std::nullopt},
      {"2", "THE CLAIM TEXT", std::nullopt},
      {"3", "useful reply", std::nullopt},
      {"4", "   ", std::nullopt},
  };
  const auto once = filter_retweets(rs, "the claim text");
  REQUIRE(once.size() == 1);
  CHECK(once[0].id == "3");
  const auto twice = filter_retweets(once, "the claim text");
  CHECK(twice.size() == once.size());
  CHECK(twice[0].id == once[0].id);
}

TEST_CASE("load_corpus: twitter15 layout, retweet removal, order preserved") {
  TempDir dir("corpus");
  const std::string jsonl =
      R"({"id":"a","claim_text":"big news","image":null,"label":"false","responses":[)"
      R"({"id":"a1","text":"RT @x: big news","ts":5},{"id":"a2","text":"doubt it","ts":7},)"
      R"({"id":"a3","text":"source?","ts":9}]})"
      "\n"
      R"({"id":"b","claim_text":"other","image":null,"label":"non-rumor","responses":[]})"
      "\n";
  write_file(dir.path() / "twitter15.jsonl", jsonl);
  const auto threads = load_corpus(dir.path(), "twitter15");
  REQUIRE(threads.size() == 2);
  REQUIRE(threads[0].responses.size() == 2);  // retweet dropped
  CHECK(threads[0].responses[0].id == "a2");
  CHECK(threads[0].responses[1].id == "a3");
  CHECK(threads[0].label == RumorLabel::kFalseRumor);
  CHECK(threads[1].label == RumorLabel::kNonRumor);

  // a thread whose only response is a retweet of the claim keeps 0 responses
  TempDir dir2("corpus2");
  write_file(dir2.path() / "threads.jsonl",
             R"({"id":"c","claim_text":"the story","image":null,"label":"true",)"
             R"("responses":[{"id":"c1","text":"RT @someone: the story","ts":null}]})"
             "\n");
  const auto threads2 = load_corpus(dir2.path(), "custom");
  REQUIRE(threads2.size() == 1);
  CHECK(threads2[0].responses.empty());
}

TEST_CASE("load_corpus: errors carry file, line and valid values") {
  TempDir dir("corpus-err");
  CHECK_THROWS_AS(load_corpus(dir.path() / "nope", "custom"), IoError);

  write_file(dir.path() / "threads.jsonl", "{not json\n");
  CHECK_THROWS_WITH_AS(load_corpus(dir.path(), "custom"), doctest::Contains(":1:"), ParseError);

  write_file(dir.path() / "threads.jsonl",
             R"({"id":"a","claim_text":"x","image":null,"label":"maybe","responses":[]})" "\n");
  CHECK_THROWS_WITH_AS(load_corpus(dir.path(), "custom"),
                       doctest::Contains("false, true, unverified, non-rumor"), ParseError);

  write_file(dir.path() / "threads.jsonl",
             R"({"id":"a","claim_text":"x","image":"missing.json","label":"true","responses":[]})"
             "\n");
  CHECK_THROWS_WITH_AS(load_corpus(dir.path(), "custom"), doctest::Contains("missing.json"),
                       IoError);

  CHECK_THROWS_AS(load_corpus(dir.path(), "weird-name"), ConfigError);
}

TEST_CASE("make_folds: deterministic, stratified, partitioning") {
  std::vector<ConversationThread> ten;
  for (int i = 0; i < 10; ++i) {
    ten.push_back(mk_thread("t" + std::to_string(i), static_cast<RumorLabel>(i % 4), 0));
  }
  const auto f1 = make_folds(ten, 7);
  const auto f2 = make_folds(ten, 7);
  REQUIRE(f1.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(f1[i].test_ids == f2[i].test_ids);
    CHECK(f1[i].train_ids == f2[i].train_ids);
  }

  // corpus with the published class sizes: 1413 = 334 + 350 + 358 + 371
  std::vector<ConversationThread> corpus;
  const int sizes[4] = {334, 350, 358, 371};
  int id = 0;
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < sizes[c]; ++i) {
      corpus.push_back(mk_thread("x" + std::to_string(id++), static_cast<RumorLabel>(c), 0));
    }
  }
  const auto folds = make_folds(corpus, 1);
  std::set<std::string> seen;
  for (const auto& f : folds) {
    const std::size_t n = f.test_ids.size();
    CHECK((n == 282 || n == 283));
    CHECK(f.train_ids.size() + f.test_ids.size() == corpus.size());
    std::set<std::string> train(f.train_ids.begin(), f.train_ids.end());
    for (const auto& tid : f.test_ids) {
      CHECK(!train.count(tid));
      CHECK(seen.insert(tid).second);  // test sets are disjoint across folds
    }
    // per-class counts stay within one of proportional
    std::map<std::string, int> label_of;
    std::map<int, int> count;
    for (const auto& t : corpus) label_of[t.claim.id] = static_cast<int>(t.label);
    for (const auto& tid : f.test_ids) count[label_of[tid]]++;
    for (int c = 0; c < 4; ++c) {
      const double want = sizes[c] / 5.0;
      CHECK(std::abs(count[c] - want) <= 1.0);
    }
  }
  CHECK(seen.size() == corpus.size());

  CHECK_THROWS_AS(make_folds(std::vector<ConversationThread>(3), 1), ParamError);
}

TEST_CASE("fold file round trip") {
  TempDir dir("folds");
  std::vector<ConversationThread> ten;
  for (int i = 0; i < 10; ++i) {
    ten.push_back(mk_thread("t" + std::to_string(i), static_cast<RumorLabel>(i % 4), 0));
  }
  const auto folds = make_folds(ten, 3);
  write_folds(dir.path() / "folds.json", 3, folds);
  const auto loaded = read_folds(dir.path() / "folds.json");
  REQUIRE(loaded.size() == folds.size());
  for (std::size_t i = 0; i < folds.size(); ++i) {
    CHECK(loaded[i].train_ids == folds[i].train_ids);
    CHECK(loaded[i].test_ids == folds[i].test_ids);
  }
}

TEST_CASE("truncate_and_mark: budget, empty case, boundary, prefix") {
  PaddingPolicy policy;
  policy.max_responses = 100;

  auto t150 = truncate_and_mark(mk_thread("a", RumorLabel::kTrueRumor, 150), policy);
  CHECK(t150.thread.responses.size() == 100);
  CHECK(static_cast<int>(t150.slot_real.size()) == 100);
  CHECK(std::count(t150.slot_real.begin(), t150.slot_real.end(), true) == 100);
  // kept responses are the chronological prefix
  for (int i = 0; i < 100; ++i) {
    CHECK(t150.thread.responses[static_cast<std::size_t>(i)].id ==
          "a-r" + std::to_string(i));
  }

  auto t0 = truncate_and_mark(mk_thread("b", RumorLabel::kTrueRumor, 0), policy);
  CHECK(t0.thread.responses.empty());
  CHECK(std::count(t0.slot_real.begin(), t0.slot_real.end(), true) == 0);

  auto t100 = truncate_and_mark(mk_thread("c", RumorLabel::kTrueRumor, 100), policy);
  CHECK(t100.thread.responses.size() == 100);
  CHECK(std::count(t100.slot_real.begin(), t100.slot_real.end(), true) == 100);
}

TEST_CASE("thread jsonl: write and reload a corpus") {
  TempDir dir("rt");
  std::vector<ConversationThread> corpus;
  for (int i = 0; i < 8; ++i) {
    corpus.push_back(mk_thread("t" + std::to_string(i), static_cast<RumorLabel>(i % 4), i));
  }
  write_corpus_jsonl(dir.path() / "threads.jsonl", corpus);
  const auto loaded = load_corpus(dir.path(), "custom");
  REQUIRE(loaded.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(loaded[i].claim.id == corpus[i].claim.id);
    CHECK(loaded[i].claim.text == corpus[i].claim.text);
    CHECK(loaded[i].label == corpus[i].label);
    CHECK(loaded[i].responses.size() == corpus[i].responses.size());
  }
}
