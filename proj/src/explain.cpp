// SPDX-License-Identifier: Apache-2.0
#include "form/explain.hpp"

#include <nlohmann/json.hpp>

namespace form {

using nlohmann::json;

json explain_thread(const FormModel& model, const EncodedThread& encoded,
                    const ConversationThread& thread) {
  Tape tape;
  FormModel::Forward fwd = model.forward(tape, encoded);

  json j;
  j["thread_id"] = encoded.thread_id;
  j["label"] = to_string(thread.label);

  const Matrix& alpha = tape.value(fwd.alpha);
  json alphas = json::array();
  for (Eigen::Index i = 0; i < alpha.cols(); ++i) alphas.push_back(alpha(0, i));
  j["alpha"] = alphas;

  json selected = json::array();
  for (int idx : fwd.selected) {
    json s;
    s["index"] = idx;
    s["score"] = alpha(0, idx);
    if (idx < static_cast<int>(thread.responses.size())) {
      s["id"] = thread.responses[static_cast<std::size_t>(idx)].id;
      s["text"] = thread.responses[static_cast<std::size_t>(idx)].text;
    }
    selected.push_back(s);
  }
  j["selected"] = selected;
  j["used_virtual_node"] = fwd.used_virtual_node;

  if (fwd.graph_probs.valid()) {
    const Matrix& sig = tape.value(fwd.node_significance);
    json sigs = json::array();
    for (Eigen::Index q = 0; q < sig.rows(); ++q) sigs.push_back(sig(q, 0));
    j["node_significance"] = sigs;

    const Matrix& np = tape.value(fwd.node_probs);
    json per_node = json::array();
    for (Eigen::Index q = 0; q < np.cols(); ++q) {
      json dist = json::array();
      for (int c = 0; c < kNumClasses; ++c) dist.push_back(np(c, q));
      per_node.push_back(dist);
    }
    j["per_node_probs"] = per_node;
  }

  const Matrix dist = model.predicted_distribution(tape, fwd);
  json probs = json::array();
  for (int c = 0; c < kNumClasses; ++c) probs.push_back(dist(c, 0));
  j["probs"] = probs;
  j["predicted"] = to_string(static_cast<RumorLabel>(model.predict_class(tape, fwd)));
  return j;
}

}  // namespace form
