// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "form/common.hpp"

namespace form {

// Named parameter matrices with stable iteration order (creation order).
class ParamStore {
 public:
  // Weight matrix with symmetric uniform init scaled by 1/sqrt(fan_in),
  // fan_in = cols. Biases use add_zeros.
  Matrix& add(const std::string& name, int rows, int cols, std::mt19937_64& rng);
  Matrix& add_zeros(const std::string& name, int rows, int cols);

  bool has(const std::string& name) const;
  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;

  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }

  // Checkpoint: one file holding a JSON manifest {name -> shape, dtype,
  // byte_offset} plus a contiguous little-endian payload. `meta` is echoed
  // into the manifest and returned by load_meta.
  void save(const std::filesystem::path& path, const nlohmann::json& meta) const;
  // Loads values into the existing layout; a shape mismatch or a missing
  // parameter raises an error naming the parameter.
  void load(const std::filesystem::path& path);
  static nlohmann::json load_meta(const std::filesystem::path& path);

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Matrix> values_;
};

// Adam with bias correction; state is keyed by parameter name.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8);

  // Applies one update from accumulated gradients (same keying as params).
  void step(ParamStore& params, const std::unordered_map<std::string, Matrix>& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::unordered_map<std::string, Matrix> m_, v_;
};

}  // namespace form
