// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "form/common.hpp"

namespace form {

// Handle into a Tape. Default-constructed handles are invalid.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode automatic differentiation over dense matrices.
//
// Every operation evaluates eagerly and records a closure that scatters the
// upstream gradient to its inputs. A Tape describes one forward evaluation;
// training rebuilds it every step (define-by-run). Column vectors are plain
// n x 1 matrices. All math is double precision.
//
// The op set is exactly what the model needs: dense products, tanh/relu,
// row-wise and vector softmax, column-cosine similarity, concatenation,
// slicing and column reductions. Masking is expressed with constant
// matrices (mul_const / add_const), which keeps the gradient story trivial.
class Tape {
 public:
  // Leaf holding a constant or parameter value. Gradients accumulate for all
  // leaves; callers read them for the leaves they care about.
  Var input(Matrix value);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  // a + c where c is a constant (used for -inf style softmax masking).
  Var add_const(Var a, Matrix c);
  // a .* c where c is a constant 0/1 matrix (used for masked sums).
  Var mul_const(Var a, Matrix c);

  Var matmul(Var a, Var b);
  Var transpose(Var a);

  Var tanh(Var a);
  Var relu(Var a);
  Var log(Var a);
  Var clamp_min(Var a, double lo);

  // Softmax across each row (normalizes over columns).
  Var softmax_rows(Var a);
  // Softmax over the entries of an n x 1 vector.
  Var softmax_vec(Var a);
  Var log_softmax_vec(Var a);

  // C(i, j) = cosine(x.col(i), y.col(j)); a zero-norm column yields 0.
  Var cosine_columns(Var x, Var y);

  Var hcat(const std::vector<Var>& parts);
  Var vcat(const std::vector<Var>& parts);
  Var col(Var a, int j);
  Var cols(Var a, int start, int n);
  Var pick(Var a, int r, int c);  // 1 x 1 slice

  Var sum_cols(Var a);   // d x m -> d x 1
  Var mean_cols(Var a);  // d x m -> d x 1
  Var repeat_col(Var a, int n);  // d x 1 -> d x n

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;

  // Seeds d(loss)/d(loss) = 1 and runs the recorded closures in reverse.
  // `loss` must be 1 x 1. May be called once per tape.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    // Receives the tape and this node (value + accumulated grad) and
    // scatters the gradient to the node's inputs.
    std::function<void(Tape&, const Node&)> back;
  };

  Var emplace(Matrix value, std::function<void(Tape&, const Node&)> back);
  Matrix& grad_ref(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
};

}  // namespace form
