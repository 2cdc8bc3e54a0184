// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "form/data.hpp"

namespace form {

// Accuracy plus one-vs-rest F1 per class, derived from a 4x4 confusion
// matrix (rows = gold, cols = predicted). Every metric is computed as a
// single division of exact integer counts, so independent recomputation
// from the same confusion matrix matches bit for bit.
struct EvalReport {
  double accuracy = 0.0;
  std::array<double, kNumClasses> f1{};
  std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> confusion{};
  int fold_index = -1;

  static EvalReport from_confusion(
      const std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>& confusion,
      int fold_index = -1);
  static EvalReport from_pairs(const std::vector<int>& gold, const std::vector<int>& predicted,
                               int fold_index = -1);

  std::int64_t total() const;
};

}  // namespace form
