// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "form/common.hpp"
#include "form/data.hpp"

namespace form {

// Token-level features of one text: d_t x M with a per-position validity
// mask. Columns past the real token count hold the encoder's pad embedding.
struct TokenFeatures {
  Matrix H;
  std::vector<bool> mask;
};

// Object-level features of one image: d_i x K. Absent object slots are
// one-padded (all-ones columns) and masked false.
struct ObjectFeatures {
  Matrix O;
  std::vector<bool> mask;
};

// All raw encoder outputs for one thread, fully padded to the policy dims.
// Sentence-level features are intentionally NOT stored: the tanh projection
// that produces them is a trainable layer, so the model applies it over the
// raw first-token states (`response_cls`, and claim_tokens column 0) at
// forward time. That keeps cached features valid across training steps.
struct EncodedThread {
  std::string thread_id;
  TokenFeatures claim_tokens;                 // d_t x M
  ObjectFeatures claim_objects;               // d_i x K
  std::vector<TokenFeatures> response_tokens; // N entries, each d_t x M
  Matrix response_cls;                        // d_t x N, column i = response i first-token state
  std::vector<bool> response_mask;            // N, true = real response
  std::vector<std::string> response_ids;      // N, empty string for pad slots
};

// Produces token- and object-level features. Implementations must be
// deterministic: encoding the same input twice yields bitwise-equal output.
class EncoderAdapter {
 public:
  virtual ~EncoderAdapter() = default;

  // Stable identity string; a cache entry written under a different id is
  // treated as a miss.
  virtual std::string id() const = 0;
  virtual int text_dim() const = 0;    // d_t
  virtual int object_dim() const = 0;  // d_i

  // Exactly max_tokens columns. Sequences longer than max_tokens keep the
  // leading tokens. An empty text encodes as all pad columns with only the
  // sequence-start position marked real.
  virtual TokenFeatures encode_text(const std::string& text, int max_tokens) const = 0;

  // Exactly max_objects columns. A missing image yields the dummy encoding:
  // every column one-padded, mask all false.
  virtual ObjectFeatures encode_image(const std::optional<std::string>& image_path,
                                      int max_objects) const = 0;

  virtual Matrix pad_embedding() const = 0;  // d_t x 1
};

// Deterministic hash-seeded encoder for desk-scale work. No external model
// artifacts; everything derives from FNV-1a/splitmix64 streams.
//
// Embedding definition (tests recompute this independently):
//   embed(token, dim, salt)[j] = signed_unit(splitmix64 stream seeded with
//                                fnv1a64(token) ^ salt), j-th draw
// Text encoding for "t1 t2 ... tn" (whitespace tokens):
//   column 0      = embed("[CLS]") + mean_j embed(t_j)   (sequence summary;
//                   stands in for a contextual first-token state)
//   column i>=1   = embed(t_i) for i <= n, then pad columns
// Toy images are JSON files {"objects": ["name", ...]}; each object column
// is embed(name) in the object space (kImageSalt).
class ToyEncoder : public EncoderAdapter {
 public:
  static constexpr std::uint64_t kTextSalt = 0x746f792d74657874ull;   // "toy-text"
  static constexpr std::uint64_t kImageSalt = 0x746f792d696d6167ull;  // "toy-imag"

  ToyEncoder(int text_dim = 32, int object_dim = 16);

  std::string id() const override;
  int text_dim() const override { return d_t_; }
  int object_dim() const override { return d_i_; }
  TokenFeatures encode_text(const std::string& text, int max_tokens) const override;
  ObjectFeatures encode_image(const std::optional<std::string>& image_path,
                              int max_objects) const override;
  Matrix pad_embedding() const override;

  // The raw per-token hash embedding (public so tests and tools can rebuild
  // columns without an encoder instance).
  static Matrix token_embedding(const std::string& token, int dim, std::uint64_t salt);

 private:
  int d_t_;
  int d_i_;
};

// Adapter over precomputed features exported from external pretrained
// models (a contextual text encoder + a region detector). It reads a
// feature-store directory:
//
//   <store>/text_pad.ftn          d_t x 1 pad-token embedding
//   <store>/text/<fnv1a64 hex of the exact text>.ftn   d_t x n hidden states
//   <store>/image/<fnv1a64 hex of the image path>.ftn  d_i x n object features
//
// Exporting the store is an offline step (see README); this adapter only
// makes the features available behind the common interface.
class PretrainedEncoder : public EncoderAdapter {
 public:
  explicit PretrainedEncoder(const std::filesystem::path& store_dir,
                             int text_dim = 768, int object_dim = 2048);

  std::string id() const override;
  int text_dim() const override { return d_t_; }
  int object_dim() const override { return d_i_; }
  TokenFeatures encode_text(const std::string& text, int max_tokens) const override;
  ObjectFeatures encode_image(const std::optional<std::string>& image_path,
                              int max_objects) const override;
  Matrix pad_embedding() const override { return pad_; }

 private:
  std::filesystem::path store_;
  int d_t_;
  int d_i_;
  Matrix pad_;
};

std::unique_ptr<EncoderAdapter> make_adapter(const std::string& name,
                                             const std::filesystem::path& pretrained_store,
                                             int toy_text_dim, int toy_object_dim);

// Persistent per-thread feature store. Entries are keyed by thread id and
// stamped with the adapter id and padding policy; a mismatch on either is a
// cache miss. Writes go through a temp file + rename, so concurrent writers
// cannot corrupt an entry.
class FeatureCache {
 public:
  explicit FeatureCache(const std::filesystem::path& dir);

  std::optional<EncodedThread> load(const std::string& thread_id, const std::string& adapter_id,
                                    const PaddingPolicy& policy,
                                    const Matrix& pad_embedding) const;
  void store(const EncodedThread& enc, const std::string& adapter_id,
             const PaddingPolicy& policy) const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path entry_path(const std::string& thread_id) const;
  std::filesystem::path dir_;
};

// Encodes one thread (already truncated to the policy) into fully padded
// tensors. With a cache, a hit returns the stored encoding bit-identically.
EncodedThread encode_thread(const TruncatedThread& truncated, const PaddingPolicy& policy,
                            const EncoderAdapter& adapter, const FeatureCache* cache = nullptr);

// truncate_and_mark + encode_thread over a corpus, order preserving.
std::vector<EncodedThread> encode_corpus(const std::vector<ConversationThread>& threads,
                                         const PaddingPolicy& policy,
                                         const EncoderAdapter& adapter,
                                         const FeatureCache* cache = nullptr);

}  // namespace form
