// SPDX-License-Identifier: Apache-2.0
#include "form/params.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "form/tensor_io.hpp"

namespace form {

using nlohmann::json;

Matrix& ParamStore::add(const std::string& name, int rows, int cols, std::mt19937_64& rng) {
  if (has(name)) throw ParamError("duplicate parameter '" + name + "'");
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
  }
  order_.push_back(name);
  return values_.emplace(name, std::move(m)).first->second;
}

Matrix& ParamStore::add_zeros(const std::string& name, int rows, int cols) {
  if (has(name)) throw ParamError("duplicate parameter '" + name + "'");
  order_.push_back(name);
  return values_.emplace(name, Matrix::Zero(rows, cols)).first->second;
}

bool ParamStore::has(const std::string& name) const { return values_.count(name) != 0; }

Matrix& ParamStore::at(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw ParamError("unknown parameter '" + name + "'");
  return it->second;
}

const Matrix& ParamStore::at(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw ParamError("unknown parameter '" + name + "'");
  return it->second;
}

void ParamStore::save(const std::filesystem::path& path, const json& meta) const {
  TensorFile tf;
  json m = meta;
  m["format"] = "form-checkpoint-v1";
  json order = json::array();
  for (const auto& n : order_) order.push_back(n);
  m["param_order"] = order;
  tf.set_meta(m);
  for (const auto& n : order_) tf.tensors[n] = values_.at(n);
  tf.save(path);
}

void ParamStore::load(const std::filesystem::path& path) {
  TensorFile tf = TensorFile::load(path);
  for (const auto& name : order_) {
    auto it = tf.tensors.find(name);
    if (it == tf.tensors.end()) {
      throw ConfigError("checkpoint " + path.string() + " lacks parameter '" + name + "'");
    }
    Matrix& dst = values_.at(name);
    if (it->second.rows() != dst.rows() || it->second.cols() != dst.cols()) {
      throw ConfigError("checkpoint " + path.string() + ": parameter '" + name + "' has shape " +
                        std::to_string(it->second.rows()) + "x" +
                        std::to_string(it->second.cols()) + ", expected " +
                        std::to_string(dst.rows()) + "x" + std::to_string(dst.cols()));
    }
    dst = it->second;
  }
}

json ParamStore::load_meta(const std::filesystem::path& path) {
  return TensorFile::load(path).meta();
}

AdamOptimizer::AdamOptimizer(double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (learning_rate <= 0) throw ParamError("learning rate must be positive");
}

void AdamOptimizer::step(ParamStore& params,
                         const std::unordered_map<std::string, Matrix>& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& name : params.names()) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const Matrix& g = git->second;
    Matrix& p = params.at(name);
    auto mit = m_.find(name);
    if (mit == m_.end()) {
      mit = m_.emplace(name, Matrix::Zero(p.rows(), p.cols())).first;
      v_.emplace(name, Matrix::Zero(p.rows(), p.cols()));
    }
    Matrix& m = mit->second;
    Matrix& v = v_.at(name);
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    const Matrix mhat = m / bc1;
    const Matrix vhat = v / bc2;
    p.array() -= lr_ * mhat.array() / (vhat.array().sqrt() + eps_);
  }
}

}  // namespace form
