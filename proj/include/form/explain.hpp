// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json_fwd.hpp>

#include "form/model.hpp"

namespace form {

// Per-thread inspection record: response weights, the retained responses,
// node significance and per-node class distributions, and the final
// prediction.
nlohmann::json explain_thread(const FormModel& model, const EncodedThread& encoded,
                              const ConversationThread& thread);

}  // namespace form
