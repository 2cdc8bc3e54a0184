// SPDX-License-Identifier: Apache-2.0
#include "form/tape.hpp"

#include <cmath>

namespace form {

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ParamError(std::string(op) + ": shape mismatch " +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

}  // namespace

Var Tape::emplace(Matrix value, std::function<void(Tape&, const Node&)> back) {
  Node n;
  n.grad = Matrix::Zero(value.rows(), value.cols());
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw ParamError("tape: invalid var handle");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Matrix& Tape::value(Var v) const { return node(v).value; }
const Matrix& Tape::grad(Var v) const { return node(v).grad; }

Var Tape::input(Matrix value) { return emplace(std::move(value), nullptr); }

Var Tape::add(Var a, Var b) {
  check_same_shape(value(a), value(b), "add");
  Matrix out = value(a) + value(b);
  int ia = a.id, ib = b.id;
  return emplace(std::move(out), [ia, ib](Tape& t, const Node& self) {
    t.grad_ref(ia) += self.grad;
    t.grad_ref(ib) += self.grad;
  });
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(value(a), value(b), "sub");
  Matrix out = value(a) - value(b);
  int ia = a.id, ib = b.id;
  return emplace(std::move(out), [ia, ib](Tape& t, const Node& self) {
    t.grad_ref(ia) += self.grad;
    t.grad_ref(ib) -= self.grad;
  });
}

Var Tape::scale(Var a, double s) {
  Matrix out = value(a) * s;
  int ia = a.id;
  return emplace(std::move(out), [ia, s](Tape& t, const Node& self) {
    t.grad_ref(ia) += self.grad * s;
  });
}

Var Tape::add_const(Var a, Matrix c) {
  check_same_shape(value(a), c, "add_const");
  Matrix out = value(a) + c;
  int ia = a.id;
  return emplace(std::move(out), [ia](Tape& t, const Node& self) {
    t.grad_ref(ia) += self.grad;
  });
}

Var Tape::mul_const(Var a, Matrix c) {
  check_same_shape(value(a), c, "mul_const");
  Matrix out = value(a).cwiseProduct(c);
  int ia = a.id;
  return emplace(std::move(out), [ia, c](Tape& t, const Node& self) {
    t.grad_ref(ia) += self.grad.cwiseProduct(c);
  });
}

Var Tape::matmul(Var a, Var b) {
  if (value(a).cols() != value(b).rows()) {
    throw ParamError("matmul: inner dimensions differ");
  }
  Matrix out = value(a) * value(b);
  int ia = a.id, ib = b.id;
  return emplace(std::move(out), [ia, ib](Tape& t, const Node& self) {
    t.grad_ref(ia) += self.grad * t.nodes_[ib].value.transpose();
    t.grad_ref(ib) += t.nodes_[ia].value.transpose() * self.grad;
  });
}

Var Tape::transpose(Var a) {
  Matrix out = value(a).transpose();
  int ia = a.id;
  return emplace(std::move(out), [ia](Tape& t, const Node& self) {
    t.grad_ref(ia) += self.grad.transpose();
  });
}

Var Tape::tanh(Var a) {
  Matrix out = value(a).array().tanh();
  int ia = a.id;
  return emplace(std::move(out), [ia](Tape& t, const Node& self) {
    t.grad_ref(ia) += (self.grad.array() * (1.0 - self.value.array().square())).matrix();
  });
}

Var Tape::relu(Var a) {
  Matrix out = value(a).cwiseMax(0.0);
  int ia = a.id;
  return emplace(std::move(out), [ia](Tape& t, const Node& self) {
    const Matrix& x = t.nodes_[ia].value;
    t.grad_ref(ia) += (self.grad.array() * (x.array() > 0.0).cast<double>()).matrix();
  });
}

Var Tape::log(Var a) {
  Matrix out = value(a).array().log();
  int ia = a.id;
  return emplace(std::move(out), [ia](Tape& t, const Node& self) {
    const Matrix& x = t.nodes_[ia].value;
    t.grad_ref(ia) += (self.grad.array() / x.array()).matrix();
  });
}

Var Tape::clamp_min(Var a, double lo) {
  Matrix out = value(a).cwiseMax(lo);
  int ia = a.id;
  return emplace(std::move(out), [ia, lo](Tape& t, const Node& self) {
    const Matrix& x = t.nodes_[ia].value;
    t.grad_ref(ia) += (self.grad.array() * (x.array() > lo).cast<double>()).matrix();
  });
}

Var Tape::softmax_rows(Var a) {
  const Matrix& x = value(a);
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    Eigen::ArrayXd e = (x.row(r).array() - m).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  int ia = a.id;
  return emplace(std::move(out), [ia](Tape& t, const Node& self) {
    const Matrix& y = self.value;
    const Matrix& g = self.grad;
    Matrix gx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = y.row(r).dot(g.row(r));
      gx.row(r) = (y.row(r).array() * (g.row(r).array() - dot)).matrix();
    }
    t.grad_ref(ia) += gx;
  });
}

Var Tape::softmax_vec(Var a) {
  const Matrix& x = value(a);
  if (x.cols() != 1) throw ParamError("softmax_vec: expects an n x 1 vector");
  const double m = x.maxCoeff();
  Eigen::ArrayXd e = (x.col(0).array() - m).exp();
  Matrix out = (e / e.sum()).matrix();
  int ia = a.id;
  return emplace(std::move(out), [ia](Tape& t, const Node& self) {
    const double dot = self.value.col(0).dot(self.grad.col(0));
    t.grad_ref(ia) += (self.value.array() * (self.grad.array() - dot)).matrix();
  });
}

Var Tape::log_softmax_vec(Var a) {
  const Matrix& x = value(a);
  if (x.cols() != 1) throw ParamError("log_softmax_vec: expects an n x 1 vector");
  const double m = x.maxCoeff();
  const double lse = m + std::log((x.col(0).array() - m).exp().sum());
  Matrix out = x.array() - lse;
  int ia = a.id;
  return emplace(std::move(out), [ia](Tape& t, const Node& self) {
    const double gsum = self.grad.sum();
    t.grad_ref(ia) += (self.grad.array() - self.value.array().exp() * gsum).matrix();
  });
}

Var Tape::cosine_columns(Var x, Var y) {
  const Matrix& X = value(x);
  const Matrix& Y = value(y);
  if (X.rows() != Y.rows()) throw ParamError("cosine_columns: row dimensions differ");
  Eigen::ArrayXd inv_x(X.cols()), inv_y(Y.cols());
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    const double n = X.col(i).norm();
    inv_x(i) = n == 0.0 ? 0.0 : 1.0 / n;
  }
  for (Eigen::Index j = 0; j < Y.cols(); ++j) {
    const double n = Y.col(j).norm();
    inv_y(j) = n == 0.0 ? 0.0 : 1.0 / n;
  }
  Matrix Xh = X * inv_x.matrix().asDiagonal();
  Matrix Yh = Y * inv_y.matrix().asDiagonal();
  Matrix out = Xh.transpose() * Yh;
  int ix = x.id, iy = y.id;
  return emplace(std::move(out), [ix, iy, Xh, Yh, inv_x, inv_y](Tape& t, const Node& self) {
    const Matrix& g = self.grad;
    // d/dX through column normalization: project out the radial component.
    Matrix gxh = Yh * g.transpose();  // d x m
    Matrix gx(Xh.rows(), Xh.cols());
    for (Eigen::Index i = 0; i < Xh.cols(); ++i) {
      const double radial = Xh.col(i).dot(gxh.col(i));
      gx.col(i) = inv_x(i) * (gxh.col(i) - Xh.col(i) * radial);
    }
    Matrix gyh = Xh * g;  // d x n
    Matrix gy(Yh.rows(), Yh.cols());
    for (Eigen::Index j = 0; j < Yh.cols(); ++j) {
      const double radial = Yh.col(j).dot(gyh.col(j));
      gy.col(j) = inv_y(j) * (gyh.col(j) - Yh.col(j) * radial);
    }
    t.grad_ref(ix) += gx;
    t.grad_ref(iy) += gy;
  });
}

Var Tape::hcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ParamError("hcat: no parts");
  const Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw ParamError("hcat: row dimensions differ");
    cols += value(p).cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  for (Var p : parts) {
    const Matrix& v = value(p);
    out.middleCols(at, v.cols()) = v;
    ids.push_back(p.id);
    widths.push_back(v.cols());
    at += v.cols();
  }
  return emplace(std::move(out), [ids, widths](Tape& t, const Node& self) {
    Eigen::Index at2 = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      t.grad_ref(ids[i]) += self.grad.middleCols(at2, widths[i]);
      at2 += widths[i];
    }
  });
}

Var Tape::vcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ParamError("vcat: no parts");
  const Eigen::Index cols = value(parts[0]).cols();
  Eigen::Index rows = 0;
  for (Var p : parts) {
    if (value(p).cols() != cols) throw ParamError("vcat: column dimensions differ");
    rows += value(p).rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> heights;
  for (Var p : parts) {
    const Matrix& v = value(p);
    out.middleRows(at, v.rows()) = v;
    ids.push_back(p.id);
    heights.push_back(v.rows());
    at += v.rows();
  }
  return emplace(std::move(out), [ids, heights](Tape& t, const Node& self) {
    Eigen::Index at2 = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      t.grad_ref(ids[i]) += self.grad.middleRows(at2, heights[i]);
      at2 += heights[i];
    }
  });
}

Var Tape::col(Var a, int j) { return cols(a, j, 1); }

Var Tape::cols(Var a, int start, int n) {
  const Matrix& v = value(a);
  if (start < 0 || n < 0 || start + n > v.cols()) throw ParamError("cols: out of range");
  Matrix out = v.middleCols(start, n);
  int ia = a.id;
  return emplace(std::move(out), [ia, start, n](Tape& t, const Node& self) {
    t.grad_ref(ia).middleCols(start, n) += self.grad;
  });
}

Var Tape::pick(Var a, int r, int c) {
  const Matrix& v = value(a);
  if (r < 0 || c < 0 || r >= v.rows() || c >= v.cols()) throw ParamError("pick: out of range");
  Matrix out(1, 1);
  out(0, 0) = v(r, c);
  int ia = a.id;
  return emplace(std::move(out), [ia, r, c](Tape& t, const Node& self) {
    t.grad_ref(ia)(r, c) += self.grad(0, 0);
  });
}

Var Tape::sum_cols(Var a) {
  Matrix out = value(a).rowwise().sum();
  int ia = a.id;
  const Eigen::Index m = value(a).cols();
  return emplace(std::move(out), [ia, m](Tape& t, const Node& self) {
    t.grad_ref(ia) += self.grad.replicate(1, m);
  });
}

Var Tape::mean_cols(Var a) {
  const Eigen::Index m = value(a).cols();
  if (m == 0) throw ParamError("mean_cols: empty matrix");
  Matrix out = value(a).rowwise().sum() / static_cast<double>(m);
  int ia = a.id;
  return emplace(std::move(out), [ia, m](Tape& t, const Node& self) {
    t.grad_ref(ia) += self.grad.replicate(1, m) / static_cast<double>(m);
  });
}

Var Tape::repeat_col(Var a, int n) {
  const Matrix& v = value(a);
  if (v.cols() != 1) throw ParamError("repeat_col: expects an n x 1 vector");
  Matrix out = v.replicate(1, n);
  int ia = a.id;
  return emplace(std::move(out), [ia](Tape& t, const Node& self) {
    t.grad_ref(ia) += self.grad.rowwise().sum();
  });
}

void Tape::backward(Var loss) {
  const Matrix& v = value(loss);
  if (v.rows() != 1 || v.cols() != 1) throw ParamError("backward: loss must be scalar");
  grad_ref(loss.id)(0, 0) = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.back) n.back(*this, n);
  }
}

}  // namespace form
