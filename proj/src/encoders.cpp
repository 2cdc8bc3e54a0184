// SPDX-License-Identifier: Apache-2.0
#include "form/encoders.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "form/tensor_io.hpp"

namespace form {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> whitespace_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

std::string hex64(std::uint64_t x) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[x & 0xF];
    x >>= 4;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- ToyEncoder

ToyEncoder::ToyEncoder(int text_dim, int object_dim) : d_t_(text_dim), d_i_(object_dim) {
  if (text_dim <= 0 || object_dim <= 0) throw ParamError("toy encoder dims must be positive");
}

std::string ToyEncoder::id() const {
  return "toy:dt=" + std::to_string(d_t_) + ",di=" + std::to_string(d_i_);
}

Matrix ToyEncoder::token_embedding(const std::string& token, int dim, std::uint64_t salt) {
  Matrix e(dim, 1);
  std::uint64_t state = fnv1a64(token) ^ salt;
  for (int j = 0; j < dim; ++j) {
    e(j, 0) = u64_to_signed_unit(splitmix64(state));
  }
  return e;
}

Matrix ToyEncoder::pad_embedding() const {
  return token_embedding("[PAD]", d_t_, kTextSalt);
}

TokenFeatures ToyEncoder::encode_text(const std::string& text, int max_tokens) const {
  if (max_tokens <= 0) throw ParamError("max_tokens must be positive");
  const Matrix pad = pad_embedding();
  TokenFeatures out;
  out.H = pad.replicate(1, max_tokens);
  out.mask.assign(static_cast<std::size_t>(max_tokens), false);

  const std::vector<std::string> tokens = whitespace_tokens(text);
  if (tokens.empty()) {
    // Empty input: all pad columns, only the sequence-start slot is real.
    out.mask[0] = true;
    return out;
  }

  Matrix cls = token_embedding("[CLS]", d_t_, kTextSalt);
  Matrix mean = Matrix::Zero(d_t_, 1);
  for (const auto& t : tokens) mean += token_embedding(t, d_t_, kTextSalt);
  mean /= static_cast<double>(tokens.size());
  out.H.col(0) = cls + mean;
  out.mask[0] = true;

  const int n_content = std::min<int>(static_cast<int>(tokens.size()), max_tokens - 1);
  for (int i = 0; i < n_content; ++i) {
    out.H.col(i + 1) = token_embedding(tokens[static_cast<std::size_t>(i)], d_t_, kTextSalt);
    out.mask[static_cast<std::size_t>(i + 1)] = true;
  }
  return out;
}

ObjectFeatures ToyEncoder::encode_image(const std::optional<std::string>& image_path,
                                        int max_objects) const {
  if (max_objects <= 0) throw ParamError("max_objects must be positive");
  ObjectFeatures out;
  out.O = Matrix::Ones(d_i_, max_objects);
  out.mask.assign(static_cast<std::size_t>(max_objects), false);
  if (!image_path) return out;  // dummy image: one-padding everywhere

  std::ifstream in(*image_path);
  if (!in) throw IoError("cannot read image file: " + *image_path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("cannot parse toy image file " + *image_path + ": " + e.what());
  }
  if (!j.contains("objects") || !j["objects"].is_array()) {
    throw IoError("toy image file " + *image_path + " lacks an \"objects\" array");
  }
  int col = 0;
  for (const auto& name : j["objects"]) {
    if (col >= max_objects) break;
    out.O.col(col) = token_embedding(name.get<std::string>(), d_i_, kImageSalt);
    out.mask[static_cast<std::size_t>(col)] = true;
    ++col;
  }
  return out;
}

// --------------------------------------------------------- PretrainedEncoder

PretrainedEncoder::PretrainedEncoder(const fs::path& store_dir, int text_dim, int object_dim)
    : store_(store_dir), d_t_(text_dim), d_i_(object_dim) {
  const fs::path pad_file = store_ / "text_pad.ftn";
  if (!fs::exists(store_) || !fs::exists(pad_file)) {
    throw ConfigError("encoder adapter 'pretrained': feature store not usable at " +
                      store_.string() + " (missing " + pad_file.string() +
                      "); export features first, see README");
  }
  TensorFile tf = TensorFile::load(pad_file);
  auto it = tf.tensors.find("pad");
  if (it == tf.tensors.end() || it->second.rows() != d_t_ || it->second.cols() != 1) {
    throw ConfigError("encoder adapter 'pretrained': bad pad embedding in " + pad_file.string());
  }
  pad_ = it->second;
}

std::string PretrainedEncoder::id() const {
  return "pretrained:dt=" + std::to_string(d_t_) + ",di=" + std::to_string(d_i_);
}

TokenFeatures PretrainedEncoder::encode_text(const std::string& text, int max_tokens) const {
  if (max_tokens <= 0) throw ParamError("max_tokens must be positive");
  TokenFeatures out;
  out.H = pad_.replicate(1, max_tokens);
  out.mask.assign(static_cast<std::size_t>(max_tokens), false);
  if (whitespace_tokens(text).empty()) {
    out.mask[0] = true;
    return out;
  }
  const fs::path file = store_ / "text" / (hex64(fnv1a64(text)) + ".ftn");
  if (!fs::exists(file)) {
    throw ConfigError("encoder adapter 'pretrained': no exported features for text of thread "
                      "(expected " + file.string() + ")");
  }
  TensorFile tf = TensorFile::load(file);
  auto it = tf.tensors.find("H");
  if (it == tf.tensors.end() || it->second.rows() != d_t_) {
    throw ConfigError("encoder adapter 'pretrained': bad tensor in " + file.string());
  }
  const Matrix& h = it->second;
  const int n = std::min<int>(static_cast<int>(h.cols()), max_tokens);
  out.H.leftCols(n) = h.leftCols(n);
  for (int i = 0; i < n; ++i) out.mask[static_cast<std::size_t>(i)] = true;
  return out;
}

ObjectFeatures PretrainedEncoder::encode_image(const std::optional<std::string>& image_path,
                                               int max_objects) const {
  if (max_objects <= 0) throw ParamError("max_objects must be positive");
  ObjectFeatures out;
  out.O = Matrix::Ones(d_i_, max_objects);
  out.mask.assign(static_cast<std::size_t>(max_objects), false);
  if (!image_path) return out;
  const fs::path file = store_ / "image" / (hex64(fnv1a64(*image_path)) + ".ftn");
  if (!fs::exists(file)) {
    throw ConfigError("encoder adapter 'pretrained': no exported features for image " +
                      *image_path + " (expected " + file.string() + ")");
  }
  TensorFile tf = TensorFile::load(file);
  auto it = tf.tensors.find("O");
  if (it == tf.tensors.end() || it->second.rows() != d_i_) {
    throw ConfigError("encoder adapter 'pretrained': bad tensor in " + file.string());
  }
  const Matrix& o = it->second;
  const int n = std::min<int>(static_cast<int>(o.cols()), max_objects);
  out.O.leftCols(n) = o.leftCols(n);
  for (int j = 0; j < n; ++j) out.mask[static_cast<std::size_t>(j)] = true;
  return out;
}

std::unique_ptr<EncoderAdapter> make_adapter(const std::string& name,
                                             const fs::path& pretrained_store,
                                             int toy_text_dim, int toy_object_dim) {
  if (name == "toy") return std::make_unique<ToyEncoder>(toy_text_dim, toy_object_dim);
  if (name == "pretrained") return std::make_unique<PretrainedEncoder>(pretrained_store);
  throw ConfigError("unknown encoder adapter '" + name + "'; expected toy or pretrained");
}

// ---------------------------------------------------------------- cache

namespace {

std::vector<std::uint8_t> mask_bytes(const std::vector<bool>& mask) {
  std::vector<std::uint8_t> out(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? 1 : 0;
  return out;
}

std::vector<bool> bytes_mask(const std::vector<std::uint8_t>& bytes) {
  std::vector<bool> out(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) out[i] = bytes[i] != 0;
  return out;
}

}  // namespace

FeatureCache::FeatureCache(const fs::path& dir) : dir_(dir) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create cache dir " + dir_.string() + ": " + ec.message());
}

fs::path FeatureCache::entry_path(const std::string& thread_id) const {
  // Hash the id rather than trusting it as a filename.
  return dir_ / (hex64(fnv1a64(thread_id)) + ".ftr");
}

void FeatureCache::store(const EncodedThread& enc, const std::string& adapter_id,
                         const PaddingPolicy& policy) const {
  TensorFile tf;
  json meta;
  meta["thread_id"] = enc.thread_id;
  meta["adapter_id"] = adapter_id;
  meta["dtype"] = "f8";
  meta["policy"] = {{"N", policy.max_responses}, {"M", policy.max_tokens},
                    {"K", policy.max_objects}};
  int n_real = 0;
  for (bool b : enc.response_mask) n_real += b ? 1 : 0;
  meta["n_real"] = n_real;
  json ids = json::array();
  for (int i = 0; i < n_real; ++i) ids.push_back(enc.response_ids[static_cast<std::size_t>(i)]);
  meta["response_ids"] = ids;
  tf.set_meta(meta);

  tf.tensors["claim_H"] = enc.claim_tokens.H;
  tf.tensors["claim_O"] = enc.claim_objects.O;
  tf.bytes["claim_H_mask"] = mask_bytes(enc.claim_tokens.mask);
  tf.bytes["claim_O_mask"] = mask_bytes(enc.claim_objects.mask);
  // Pad slots are reconstructed from the pad embedding on load; only real
  // responses are materialized in the record.
  for (int i = 0; i < n_real; ++i) {
    const auto& r = enc.response_tokens[static_cast<std::size_t>(i)];
    tf.tensors["resp_H_" + std::to_string(i)] = r.H;
    tf.bytes["resp_H_mask_" + std::to_string(i)] = mask_bytes(r.mask);
  }
  tf.save(entry_path(enc.thread_id));
}

std::optional<EncodedThread> FeatureCache::load(const std::string& thread_id,
                                                const std::string& adapter_id,
                                                const PaddingPolicy& policy,
                                                const Matrix& pad_embedding) const {
  const fs::path path = entry_path(thread_id);
  if (!fs::exists(path)) return std::nullopt;
  TensorFile tf;
  try {
    tf = TensorFile::load(path);
  } catch (const FormError&) {
    return std::nullopt;  // corrupt entry: re-encode
  }
  const json meta = tf.meta();
  if (meta.value("thread_id", "") != thread_id) return std::nullopt;
  if (meta.value("adapter_id", "") != adapter_id) return std::nullopt;
  if (!meta.contains("policy")) return std::nullopt;
  const json& pj = meta["policy"];
  if (pj.value("N", -1) != policy.max_responses || pj.value("M", -1) != policy.max_tokens ||
      pj.value("K", -1) != policy.max_objects) {
    return std::nullopt;
  }

  EncodedThread enc;
  enc.thread_id = thread_id;
  enc.claim_tokens.H = tf.tensors.at("claim_H");
  enc.claim_tokens.mask = bytes_mask(tf.bytes.at("claim_H_mask"));
  enc.claim_objects.O = tf.tensors.at("claim_O");
  enc.claim_objects.mask = bytes_mask(tf.bytes.at("claim_O_mask"));

  const int N = policy.max_responses;
  const int M = policy.max_tokens;
  const int n_real = meta.value("n_real", 0);
  enc.response_mask.assign(static_cast<std::size_t>(N), false);
  enc.response_ids.assign(static_cast<std::size_t>(N), "");
  enc.response_cls.resize(pad_embedding.rows(), N);
  TokenFeatures pad_slot;
  pad_slot.H = pad_embedding.replicate(1, M);
  pad_slot.mask.assign(static_cast<std::size_t>(M), false);
  enc.response_tokens.assign(static_cast<std::size_t>(N), pad_slot);
  for (int i = 0; i < n_real; ++i) {
    TokenFeatures r;
    r.H = tf.tensors.at("resp_H_" + std::to_string(i));
    r.mask = bytes_mask(tf.bytes.at("resp_H_mask_" + std::to_string(i)));
    enc.response_tokens[static_cast<std::size_t>(i)] = std::move(r);
    enc.response_mask[static_cast<std::size_t>(i)] = true;
    enc.response_ids[static_cast<std::size_t>(i)] = meta["response_ids"][i].get<std::string>();
  }
  for (int i = 0; i < N; ++i) {
    enc.response_cls.col(i) = enc.response_tokens[static_cast<std::size_t>(i)].H.col(0);
  }
  return enc;
}

// ---------------------------------------------------------------- pipeline

EncodedThread encode_thread(const TruncatedThread& truncated, const PaddingPolicy& policy,
                            const EncoderAdapter& adapter, const FeatureCache* cache) {
  policy.validate();
  const ConversationThread& thread = truncated.thread;
  if (static_cast<int>(thread.responses.size()) > policy.max_responses) {
    throw ParamError("thread " + thread.claim.id + " exceeds the response budget; truncate first");
  }
  if (cache) {
    auto hit = cache->load(thread.claim.id, adapter.id(), policy, adapter.pad_embedding());
    if (hit) return *hit;
  }

  EncodedThread enc;
  enc.thread_id = thread.claim.id;
  enc.claim_tokens = adapter.encode_text(thread.claim.text, policy.max_tokens);
  enc.claim_objects = adapter.encode_image(thread.claim.image_path, policy.max_objects);

  const int N = policy.max_responses;
  const Matrix pad = adapter.pad_embedding();
  TokenFeatures pad_slot;
  pad_slot.H = pad.replicate(1, policy.max_tokens);
  pad_slot.mask.assign(static_cast<std::size_t>(policy.max_tokens), false);

  enc.response_tokens.reserve(static_cast<std::size_t>(N));
  enc.response_mask.assign(static_cast<std::size_t>(N), false);
  enc.response_ids.assign(static_cast<std::size_t>(N), "");
  enc.response_cls.resize(adapter.text_dim(), N);
  for (int i = 0; i < N; ++i) {
    if (i < static_cast<int>(thread.responses.size())) {
      const auto& r = thread.responses[static_cast<std::size_t>(i)];
      enc.response_tokens.push_back(adapter.encode_text(r.text, policy.max_tokens));
      enc.response_mask[static_cast<std::size_t>(i)] = true;
      enc.response_ids[static_cast<std::size_t>(i)] = r.id;
    } else {
      enc.response_tokens.push_back(pad_slot);
    }
    enc.response_cls.col(i) = enc.response_tokens.back().H.col(0);
  }

  if (cache) cache->store(enc, adapter.id(), policy);
  return enc;
}

std::vector<EncodedThread> encode_corpus(const std::vector<ConversationThread>& threads,
                                         const PaddingPolicy& policy,
                                         const EncoderAdapter& adapter,
                                         const FeatureCache* cache) {
  std::vector<EncodedThread> out;
  out.reserve(threads.size());
  for (const auto& t : threads) {
    out.push_back(encode_thread(truncate_and_mark(t, policy), policy, adapter, cache));
  }
  return out;
}

}  // namespace form
