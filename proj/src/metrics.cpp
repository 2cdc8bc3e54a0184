// SPDX-License-Identifier: Apache-2.0
#include "form/metrics.hpp"

namespace form {

EvalReport EvalReport::from_confusion(
    const std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>& confusion,
    int fold_index) {
  EvalReport r;
  r.confusion = confusion;
  r.fold_index = fold_index;

  std::int64_t total = 0, correct = 0;
  for (int g = 0; g < kNumClasses; ++g) {
    for (int p = 0; p < kNumClasses; ++p) {
      total += confusion[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)];
    }
    correct += confusion[static_cast<std::size_t>(g)][static_cast<std::size_t>(g)];
  }
  r.accuracy = total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);

  for (int c = 0; c < kNumClasses; ++c) {
    const auto cu = static_cast<std::size_t>(c);
    const std::int64_t tp = confusion[cu][cu];
    std::int64_t fp = 0, fn = 0;
    for (int o = 0; o < kNumClasses; ++o) {
      if (o == c) continue;
      fp += confusion[static_cast<std::size_t>(o)][cu];
      fn += confusion[cu][static_cast<std::size_t>(o)];
    }
    const std::int64_t denom = 2 * tp + fp + fn;
    r.f1[cu] = denom == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(denom);
  }
  return r;
}

EvalReport EvalReport::from_pairs(const std::vector<int>& gold, const std::vector<int>& predicted,
                                  int fold_index) {
  if (gold.size() != predicted.size()) throw ParamError("gold/predicted size mismatch");
  std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> confusion{};
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || gold[i] >= kNumClasses || predicted[i] < 0 || predicted[i] >= kNumClasses) {
      throw ParamError("class index out of range in evaluation pairs");
    }
    ++confusion[static_cast<std::size_t>(gold[i])][static_cast<std::size_t>(predicted[i])];
  }
  return from_confusion(confusion, fold_index);
}

std::int64_t EvalReport::total() const {
  std::int64_t t = 0;
  for (const auto& row : confusion) {
    for (std::int64_t v : row) t += v;
  }
  return t;
}

}  // namespace form
