// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "form/data.hpp"
#include "form/encoders.hpp"
#include "form/params.hpp"
#include "form/tape.hpp"

namespace form {

enum class Ablation {
  kNone,
  kNoVisual,         // drop the visual stream: S_m = projected tokens, s_m = 0
  kNoFineReasoning,  // predict from the selection head only
  kNoSelectionLoss,  // train without the selection loss term
};

std::string to_string(Ablation a);
Ablation ablation_from_string(const std::string& s);

struct ModelConfig {
  int d_t = 768;   // token/sentence feature width
  int d_i = 2048;  // object feature width
  int d = 768;     // shared projection width
  int d_h = 128;   // MLP hidden width
  int top_k = 5;
  Ablation ablation = Ablation::kNone;
  bool mask_padding = false;  // exclude pad positions from attention and pooling
  bool untie_wz = false;      // separate sentence projections for selection/reasoning
  void validate() const;
};

// Constant helper matrices for masked attention/pooling.
// Disabled columns get a large negative bias (drives softmax weights to 0)
// or a zero factor (drops them from sums).
Matrix mask_softmax_bias(int rows, const std::vector<bool>& enabled);
Matrix mask_zero_columns(int rows, const std::vector<bool>& enabled);
int count_enabled(const std::vector<bool>& mask);

namespace ops {

// Two-layer perceptron W2 * relu(W1 x + b1) + b2 for column-vector input.
Var mlp2(Tape& t, Var x, Var w1, Var b1, Var w2, Var b2);

// --- claim fusion ---------------------------------------------------------
// V = tanh(W_o O), T = tanh(W_h H): both modalities in the shared d space.
std::pair<Var, Var> project_modalities(Tape& t, Var claim_tokens, Var claim_objects,
                                       Var w_h, Var w_o);

// Cosine cross-attention summary: each query column attends over all value
// columns with raw cosine weights (no softmax), and the attended vectors are
// averaged over queries. Masks, when given, drop pad values from the
// weighted sums and pad queries from the mean.
Var cross_align(Tape& t, Var queries, Var values,
                const std::vector<bool>* query_mask = nullptr,
                const std::vector<bool>* value_mask = nullptr);

// s_m = tanh(W_o2t s_o2t) + tanh(W_t2o s_t2o)
Var fuse_modalities(Tape& t, Var s_t2o, Var s_o2t, Var w_t2o, Var w_o2t);

// --- coarse-grained selection ---------------------------------------------
// alpha = softmax(W_a [s_m replicated; tanh(W_z Z)]), one weight per response.
Var score_responses(Tape& t, Var s_m, Var sentence_feats, Var w_z, Var w_a,
                    const std::vector<bool>* response_mask = nullptr);

// y1 = MLP(sum_i alpha_i z_i)
Var aux_predict(Tape& t, Var alpha, Var sentence_feats, Var w1, Var b1, Var w2, Var b2);

// Indices of the k highest-weight real responses, descending weight, ties
// to the lower index. Returns fewer than k when fewer real responses exist.
std::vector<int> select_top_k(const Matrix& alpha, const std::vector<bool>& response_mask,
                              int k);

// --- fine-grained reasoning -----------------------------------------------
// Message into the graph: the neighbor's projected tokens query the keys
// [S_m | T_q]; attended values are added back residually and pooled with a
// learned token attention.
Var neighbor_message(Tape& t, Var neighbor_tokens, Var keys, Var w_beta,
                     const std::vector<bool>* neighbor_token_mask = nullptr,
                     const std::vector<bool>* key_mask = nullptr);

struct Propagated {
  Var v;       // 2d x 1: [aggregated messages | tanh(W_z z_q)]
  Var lambda;  // |G| x 1 neighbor weights
};
Propagated propagate(Tape& t, const std::vector<Var>& messages, Var s_m, Var zq_proj,
                     Var lam_w1, Var lam_b1, Var lam_w2, Var lam_b2);

// P(y | n_q, G, S) = softmax(W_y [v_q | s_m])
Var node_predict(Tape& t, Var v_q, Var s_m, Var w_y);

// P(n_q | G, S): claim columns query each node's tokens; the enriched claim
// is summed and scored, then normalized over nodes.
Var node_significance(Tape& t, const std::vector<Var>& node_tokens, Var s_claim_fine,
                      Var w_sig, const std::vector<bool>* claim_col_mask = nullptr,
                      const std::vector<std::vector<bool>>* node_token_masks = nullptr);

// --- losses -----------------------------------------------------------------
Var cross_entropy_from_logits(Tape& t, Var logits, RumorLabel label);
// -log p[label] with a 1e-12 probability floor.
Var cross_entropy_from_probs(Tape& t, Var probs, RumorLabel label);

}  // namespace ops

// The full model: parameters plus the forward graph builder.
class FormModel {
 public:
  FormModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  struct Forward {
    // Parameter leaves bound into this tape, keyed like the ParamStore.
    std::unordered_map<std::string, Var> bound;
    Var s_m;        // d x 1 fused claim summary
    Var claim_fine; // d x (M+K) fused claim matrix (d x M without visuals)
    Var alpha;      // 1 x N response weights
    Var y1_logits;  // 4 x 1 selection-head logits
    std::vector<int> selected;  // responses kept for reasoning
    bool used_virtual_node = false;  // claim stood in for an empty graph
    Var node_probs;         // 4 x |G| per-node distributions
    Var node_significance;  // |G| x 1
    Var graph_probs;        // 4 x 1 mixture (invalid under kNoFineReasoning)
  };

  Forward forward(Tape& t, const EncodedThread& enc) const;

  struct Loss {
    Var total;
    Var selection;  // invalid under kNoSelectionLoss? no: always computed
    Var reason;     // invalid under kNoFineReasoning
  };
  Loss loss(Tape& t, const Forward& fwd, RumorLabel label) const;

  // Final 4-way distribution of a forward pass (graph mixture, or the
  // selection head under kNoFineReasoning).
  Matrix predicted_distribution(const Tape& t, const Forward& fwd) const;
  int predict_class(const Tape& t, const Forward& fwd) const;

  // Names of the sentence-projection parameters in use.
  std::string wz_selection_name() const;
  std::string wz_reasoning_name() const;

 private:
  void check_input(const EncodedThread& enc) const;

  ModelConfig config_;
  ParamStore params_;
};

}  // namespace form
