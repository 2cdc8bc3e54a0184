// SPDX-License-Identifier: Apache-2.0
#include "form/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace form {

namespace {
constexpr double kMaskBias = -1e30;
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kNoVisual: return "no-v";
    case Ablation::kNoFineReasoning: return "no-f";
    case Ablation::kNoSelectionLoss: return "no-s";
  }
  throw ParamError("invalid ablation code");
}

Ablation ablation_from_string(const std::string& s) {
  if (s == "none") return Ablation::kNone;
  if (s == "no-v") return Ablation::kNoVisual;
  if (s == "no-f") return Ablation::kNoFineReasoning;
  if (s == "no-s") return Ablation::kNoSelectionLoss;
  throw ConfigError("unknown ablation '" + s + "'; expected none, no-v, no-f or no-s");
}

void ModelConfig::validate() const {
  if (d_t <= 0 || d_i <= 0 || d <= 0 || d_h <= 0) {
    throw ParamError("model dimensions must be positive");
  }
  if (top_k < 1) throw ParamError("top-k must be >= 1");
}

Matrix mask_softmax_bias(int rows, const std::vector<bool>& enabled) {
  Matrix b = Matrix::Zero(rows, static_cast<Eigen::Index>(enabled.size()));
  for (std::size_t j = 0; j < enabled.size(); ++j) {
    if (!enabled[j]) b.col(static_cast<Eigen::Index>(j)).setConstant(kMaskBias);
  }
  return b;
}

Matrix mask_zero_columns(int rows, const std::vector<bool>& enabled) {
  Matrix m = Matrix::Ones(rows, static_cast<Eigen::Index>(enabled.size()));
  for (std::size_t j = 0; j < enabled.size(); ++j) {
    if (!enabled[j]) m.col(static_cast<Eigen::Index>(j)).setZero();
  }
  return m;
}

int count_enabled(const std::vector<bool>& mask) {
  return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

namespace ops {

Var mlp2(Tape& t, Var x, Var w1, Var b1, Var w2, Var b2) {
  Var h = t.relu(t.add(t.matmul(w1, x), b1));
  return t.add(t.matmul(w2, h), b2);
}

std::pair<Var, Var> project_modalities(Tape& t, Var claim_tokens, Var claim_objects,
                                       Var w_h, Var w_o) {
  Var proj_tokens = t.tanh(t.matmul(w_h, claim_tokens));
  Var proj_objects = t.tanh(t.matmul(w_o, claim_objects));
  return {proj_tokens, proj_objects};
}

Var cross_align(Tape& t, Var queries, Var values, const std::vector<bool>* query_mask,
                const std::vector<bool>* value_mask) {
  const int n_q = static_cast<int>(t.value(queries).cols());
  Var sim = t.cosine_columns(queries, values);  // n_q x n_v, raw cosine weights
  if (value_mask) {
    sim = t.mul_const(sim, mask_zero_columns(n_q, *value_mask));
  }
  Var aligned = t.matmul(values, t.transpose(sim));  // d x n_q
  if (query_mask) {
    const int d = static_cast<int>(t.value(aligned).rows());
    Var kept = t.mul_const(aligned, mask_zero_columns(d, *query_mask));
    const int n_real = std::max(1, count_enabled(*query_mask));
    return t.scale(t.sum_cols(kept), 1.0 / n_real);
  }
  return t.mean_cols(aligned);
}

Var fuse_modalities(Tape& t, Var s_t2o, Var s_o2t, Var w_t2o, Var w_o2t) {
  return t.add(t.tanh(t.matmul(w_o2t, s_o2t)), t.tanh(t.matmul(w_t2o, s_t2o)));
}

Var score_responses(Tape& t, Var s_m, Var sentence_feats, Var w_z, Var w_a,
                    const std::vector<bool>* response_mask) {
  const int n = static_cast<int>(t.value(sentence_feats).cols());
  Var proj = t.tanh(t.matmul(w_z, sentence_feats));           // d x N
  Var context = t.vcat({t.repeat_col(s_m, n), proj});         // 2d x N
  Var logits = t.matmul(w_a, context);                        // 1 x N
  if (response_mask) {
    logits = t.add_const(logits, mask_softmax_bias(1, *response_mask));
  }
  return t.softmax_rows(logits);
}

Var aux_predict(Tape& t, Var alpha, Var sentence_feats, Var w1, Var b1, Var w2, Var b2) {
  Var pooled = t.matmul(sentence_feats, t.transpose(alpha));  // d_t x 1
  return mlp2(t, pooled, w1, b1, w2, b2);
}

std::vector<int> select_top_k(const Matrix& alpha, const std::vector<bool>& response_mask,
                              int k) {
  if (k < 1) throw ParamError("top-k must be >= 1");
  if (alpha.rows() != 1 || alpha.cols() != static_cast<Eigen::Index>(response_mask.size())) {
    throw ParamError("select_top_k: alpha/mask size mismatch");
  }
  std::vector<int> real;
  for (std::size_t i = 0; i < response_mask.size(); ++i) {
    if (response_mask[i]) real.push_back(static_cast<int>(i));
  }
  std::stable_sort(real.begin(), real.end(), [&](int a, int b) {
    if (alpha(0, a) != alpha(0, b)) return alpha(0, a) > alpha(0, b);
    return a < b;
  });
  if (static_cast<int>(real.size()) > k) real.resize(static_cast<std::size_t>(k));
  return real;
}

Var neighbor_message(Tape& t, Var neighbor_tokens, Var keys, Var w_beta,
                     const std::vector<bool>* neighbor_token_mask,
                     const std::vector<bool>* key_mask) {
  const int m = static_cast<int>(t.value(neighbor_tokens).cols());
  Var sim = t.cosine_columns(neighbor_tokens, keys);  // M x (2M+K)
  if (key_mask) sim = t.add_const(sim, mask_softmax_bias(m, *key_mask));
  Var attn = t.softmax_rows(sim);
  Var enriched = t.add(t.matmul(keys, t.transpose(attn)), neighbor_tokens);  // d x M
  Var beta_logits = t.matmul(w_beta, enriched);                              // 1 x M
  if (neighbor_token_mask) {
    beta_logits = t.add_const(beta_logits, mask_softmax_bias(1, *neighbor_token_mask));
  }
  Var beta = t.softmax_rows(beta_logits);
  return t.matmul(enriched, t.transpose(beta));  // d x 1
}

Propagated propagate(Tape& t, const std::vector<Var>& messages, Var s_m, Var zq_proj,
                     Var lam_w1, Var lam_b1, Var lam_w2, Var lam_b2) {
  if (messages.empty()) throw ParamError("propagate: no messages");
  std::vector<Var> scores;
  scores.reserve(messages.size());
  for (Var msg : messages) {
    Var x = t.vcat({msg, s_m, zq_proj});  // 3d x 1
    scores.push_back(mlp2(t, x, lam_w1, lam_b1, lam_w2, lam_b2));
  }
  Propagated out;
  out.lambda = t.softmax_vec(t.vcat(scores));
  Var stacked = t.hcat(messages);                   // d x |G|
  Var aggregated = t.matmul(stacked, out.lambda);   // d x 1
  out.v = t.vcat({aggregated, zq_proj});            // 2d x 1
  return out;
}

Var node_predict(Tape& t, Var v_q, Var s_m, Var w_y) {
  Var logits = t.matmul(w_y, t.vcat({v_q, s_m}));  // 4 x 1
  return t.softmax_vec(logits);
}

Var node_significance(Tape& t, const std::vector<Var>& node_tokens, Var s_claim_fine,
                      Var w_sig, const std::vector<bool>* claim_col_mask,
                      const std::vector<std::vector<bool>>* node_token_masks) {
  if (node_tokens.empty()) throw ParamError("node_significance: no nodes");
  const int n_claim_cols = static_cast<int>(t.value(s_claim_fine).cols());
  const int d = static_cast<int>(t.value(s_claim_fine).rows());
  std::vector<Var> raw;
  raw.reserve(node_tokens.size());
  for (std::size_t q = 0; q < node_tokens.size(); ++q) {
    Var tokens = node_tokens[q];
    Var sim = t.cosine_columns(s_claim_fine, tokens);  // (M+K) x M
    if (node_token_masks) {
      sim = t.add_const(sim, mask_softmax_bias(n_claim_cols, (*node_token_masks)[q]));
    }
    Var attn = t.softmax_rows(sim);
    Var enriched = t.add(t.matmul(tokens, t.transpose(attn)), s_claim_fine);  // d x (M+K)
    Var summed = claim_col_mask
                     ? t.sum_cols(t.mul_const(enriched, mask_zero_columns(d, *claim_col_mask)))
                     : t.sum_cols(enriched);
    raw.push_back(t.matmul(w_sig, summed));  // 1 x 1
  }
  return t.softmax_vec(t.vcat(raw));
}

Var cross_entropy_from_logits(Tape& t, Var logits, RumorLabel label) {
  const int y = static_cast<int>(label);
  if (y < 0 || y >= kNumClasses) throw ParamError("label out of range");
  return t.scale(t.pick(t.log_softmax_vec(logits), y, 0), -1.0);
}

Var cross_entropy_from_probs(Tape& t, Var probs, RumorLabel label) {
  const int y = static_cast<int>(label);
  if (y < 0 || y >= kNumClasses) throw ParamError("label out of range");
  return t.scale(t.log(t.clamp_min(t.pick(probs, y, 0), 1e-12)), -1.0);
}

}  // namespace ops

// ------------------------------------------------------------------ model

FormModel::FormModel(ModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const int d_t = config_.d_t, d_i = config_.d_i, d = config_.d, d_h = config_.d_h;
  const bool visual = config_.ablation != Ablation::kNoVisual;
  const bool reasoning = config_.ablation != Ablation::kNoFineReasoning;

  params_.add("W_t", d_t, d_t, rng);
  params_.add("W_h", d, d_t, rng);
  if (visual) {
    params_.add("W_o", d, d_i, rng);
    params_.add("W_t2o", d, d, rng);
    params_.add("W_o2t", d, d, rng);
  }
  if (config_.untie_wz && reasoning) {
    params_.add("W_z_sel", d, d_t, rng);
    params_.add("W_z_reason", d, d_t, rng);
  } else {
    params_.add("W_z", d, d_t, rng);
  }
  params_.add("W_a", 1, 2 * d, rng);
  params_.add("sel_mlp_W1", d_h, d_t, rng);
  params_.add_zeros("sel_mlp_b1", d_h, 1);
  params_.add("sel_mlp_W2", kNumClasses, d_h, rng);
  params_.add_zeros("sel_mlp_b2", kNumClasses, 1);
  if (reasoning) {
    params_.add("W_p", d, d_t, rng);
    params_.add("W_q", d, d_t, rng);
    params_.add("W_beta", 1, d, rng);
    params_.add("lam_W1", d_h, 3 * d, rng);
    params_.add_zeros("lam_b1", d_h, 1);
    params_.add("lam_W2", 1, d_h, rng);
    params_.add_zeros("lam_b2", 1, 1);
    params_.add("W_y", kNumClasses, 3 * d, rng);
    params_.add("W_sig", 1, d, rng);
  }
}

std::string FormModel::wz_selection_name() const {
  return params_.has("W_z_sel") ? "W_z_sel" : "W_z";
}

std::string FormModel::wz_reasoning_name() const {
  return params_.has("W_z_reason") ? "W_z_reason" : "W_z";
}

void FormModel::check_input(const EncodedThread& enc) const {
  if (enc.claim_tokens.H.rows() != config_.d_t) {
    throw ConfigError("encoded thread " + enc.thread_id + ": token dim " +
                      std::to_string(enc.claim_tokens.H.rows()) + " != model d_t " +
                      std::to_string(config_.d_t));
  }
  if (config_.ablation != Ablation::kNoVisual && enc.claim_objects.O.rows() != config_.d_i) {
    throw ConfigError("encoded thread " + enc.thread_id + ": object dim " +
                      std::to_string(enc.claim_objects.O.rows()) + " != model d_i " +
                      std::to_string(config_.d_i));
  }
  if (enc.response_cls.rows() != config_.d_t) {
    throw ConfigError("encoded thread " + enc.thread_id + ": sentence dim mismatch");
  }
}

FormModel::Forward FormModel::forward(Tape& t, const EncodedThread& enc) const {
  check_input(enc);
  const bool masking = config_.mask_padding;
  const bool visual = config_.ablation != Ablation::kNoVisual;
  const bool reasoning = config_.ablation != Ablation::kNoFineReasoning;

  Forward out;
  for (const auto& name : params_.names()) {
    out.bound.emplace(name, t.input(params_.at(name)));
  }
  const auto p = [&](const std::string& name) { return out.bound.at(name); };

  // --- claim fusion ---
  Var claim_tokens = t.input(enc.claim_tokens.H);
  Var proj_tokens = t.tanh(t.matmul(p("W_h"), claim_tokens));
  std::vector<bool> claim_cols = enc.claim_tokens.mask;
  if (visual) {
    Var claim_objects = t.input(enc.claim_objects.O);
    Var proj_objects = t.tanh(t.matmul(p("W_o"), claim_objects));
    out.claim_fine = t.hcat({proj_tokens, proj_objects});
    Var s_t2o = ops::cross_align(t, proj_tokens, proj_objects,
                                 masking ? &enc.claim_tokens.mask : nullptr,
                                 masking ? &enc.claim_objects.mask : nullptr);
    Var s_o2t = ops::cross_align(t, proj_objects, proj_tokens,
                                 masking ? &enc.claim_objects.mask : nullptr,
                                 masking ? &enc.claim_tokens.mask : nullptr);
    out.s_m = ops::fuse_modalities(t, s_t2o, s_o2t, p("W_t2o"), p("W_o2t"));
    claim_cols.insert(claim_cols.end(), enc.claim_objects.mask.begin(),
                      enc.claim_objects.mask.end());
  } else {
    out.claim_fine = proj_tokens;
    out.s_m = t.input(Matrix::Zero(config_.d, 1));
  }

  // --- sentence features and coarse selection ---
  Var response_cls = t.input(enc.response_cls);
  Var sentence_feats = t.tanh(t.matmul(p("W_t"), response_cls));  // d_t x N
  out.alpha = ops::score_responses(t, out.s_m, sentence_feats, p(wz_selection_name()),
                                   p("W_a"), masking ? &enc.response_mask : nullptr);
  out.y1_logits = ops::aux_predict(t, out.alpha, sentence_feats, p("sel_mlp_W1"),
                                   p("sel_mlp_b1"), p("sel_mlp_W2"), p("sel_mlp_b2"));
  out.selected = ops::select_top_k(t.value(out.alpha), enc.response_mask, config_.top_k);

  if (!reasoning) return out;

  // --- fine-grained reasoning over the selected responses ---
  struct Node {
    Var as_query;   // tanh(W_p H)
    Var as_key;     // tanh(W_q H)
    Var zq_proj;    // tanh(W_z z)
    const std::vector<bool>* token_mask;
  };
  std::vector<Node> nodes;
  if (out.selected.empty()) {
    // No usable responses: reason over the claim itself as a single node.
    out.used_virtual_node = true;
    Var z_claim = t.tanh(t.matmul(p("W_t"), t.col(claim_tokens, 0)));
    Node n;
    n.as_query = t.tanh(t.matmul(p("W_p"), claim_tokens));
    n.as_key = t.tanh(t.matmul(p("W_q"), claim_tokens));
    n.zq_proj = t.tanh(t.matmul(p(wz_reasoning_name()), z_claim));
    n.token_mask = &enc.claim_tokens.mask;
    nodes.push_back(n);
  } else {
    for (int idx : out.selected) {
      const TokenFeatures& tf = enc.response_tokens[static_cast<std::size_t>(idx)];
      Var h = t.input(tf.H);
      Node n;
      n.as_query = t.tanh(t.matmul(p("W_p"), h));
      n.as_key = t.tanh(t.matmul(p("W_q"), h));
      n.zq_proj = t.tanh(t.matmul(p(wz_reasoning_name()), t.col(sentence_feats, idx)));
      n.token_mask = &tf.mask;
      nodes.push_back(n);
    }
  }

  std::vector<Var> per_node_probs;
  std::vector<Var> node_keys;
  std::vector<std::vector<bool>> node_token_masks;
  per_node_probs.reserve(nodes.size());
  for (const Node& n : nodes) {
    node_keys.push_back(n.as_key);
    node_token_masks.push_back(*n.token_mask);
  }

  for (std::size_t q = 0; q < nodes.size(); ++q) {
    Var keys = t.hcat({out.claim_fine, nodes[q].as_key});
    std::vector<bool> key_mask = claim_cols;
    key_mask.insert(key_mask.end(), nodes[q].token_mask->begin(), nodes[q].token_mask->end());
    std::vector<Var> messages;
    messages.reserve(nodes.size());
    for (const Node& np : nodes) {
      messages.push_back(ops::neighbor_message(t, np.as_query, keys, p("W_beta"),
                                               masking ? np.token_mask : nullptr,
                                               masking ? &key_mask : nullptr));
    }
    ops::Propagated prop = ops::propagate(t, messages, out.s_m, nodes[q].zq_proj,
                                          p("lam_W1"), p("lam_b1"), p("lam_W2"), p("lam_b2"));
    per_node_probs.push_back(ops::node_predict(t, prop.v, out.s_m, p("W_y")));
  }

  out.node_significance =
      ops::node_significance(t, node_keys, out.claim_fine, p("W_sig"),
                             masking ? &claim_cols : nullptr,
                             masking ? &node_token_masks : nullptr);
  out.node_probs = t.hcat(per_node_probs);                       // 4 x |G|
  out.graph_probs = t.matmul(out.node_probs, out.node_significance);  // 4 x 1
  return out;
}

FormModel::Loss FormModel::loss(Tape& t, const Forward& fwd, RumorLabel label) const {
  Loss l;
  l.selection = ops::cross_entropy_from_logits(t, fwd.y1_logits, label);
  switch (config_.ablation) {
    case Ablation::kNoFineReasoning:
      l.total = l.selection;
      return l;
    case Ablation::kNoSelectionLoss:
      l.reason = ops::cross_entropy_from_probs(t, fwd.graph_probs, label);
      l.total = l.reason;
      return l;
    case Ablation::kNone:
    case Ablation::kNoVisual:
      l.reason = ops::cross_entropy_from_probs(t, fwd.graph_probs, label);
      l.total = t.add(l.selection, l.reason);
      return l;
  }
  throw ParamError("invalid ablation code");
}

Matrix FormModel::predicted_distribution(const Tape& t, const Forward& fwd) const {
  if (config_.ablation == Ablation::kNoFineReasoning) {
    const Matrix& logits = t.value(fwd.y1_logits);
    const double m = logits.maxCoeff();
    Eigen::ArrayXd e = (logits.col(0).array() - m).exp();
    return (e / e.sum()).matrix();
  }
  return t.value(fwd.graph_probs);
}

int FormModel::predict_class(const Tape& t, const Forward& fwd) const {
  const Matrix dist = predicted_distribution(t, fwd);
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    if (dist(c, 0) > dist(best, 0)) best = c;
  }
  return best;
}

}  // namespace form
