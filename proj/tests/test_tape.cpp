// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "form/tape.hpp"
#include "test_support.hpp"

using namespace form;
using form::test::gradient_max_rel_error;
using form::test::random_matrix;

namespace {

// Reduce any matrix-valued op output to a scalar with a fixed random probe
// so every entry's gradient is exercised.
Var probe(Tape& t, Var x, const Matrix& weights) {
  return t.matmul(t.matmul(t.input(Matrix::Ones(1, t.value(x).rows())),
                           t.mul_const(x, weights)),
                  t.input(Matrix::Ones(t.value(x).cols(), 1)));
}

}  // namespace

TEST_CASE("tape: forward values of the primitive ops") {
  Tape t;
  Matrix a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  b << 5, 6, 7, 8;
  Var va = t.input(a), vb = t.input(b);

  CHECK(t.value(t.add(va, vb))(1, 1) == 12.0);
  CHECK(t.value(t.sub(va, vb))(0, 0) == -4.0);
  CHECK(t.value(t.scale(va, 0.5))(1, 0) == 1.5);
  CHECK(t.value(t.matmul(va, vb))(0, 0) == doctest::Approx(19.0));
  CHECK(t.value(t.transpose(va))(0, 1) == 3.0);
  CHECK(t.value(t.tanh(va))(0, 0) == doctest::Approx(std::tanh(1.0)));
  CHECK(t.value(t.relu(t.sub(va, vb)))(0, 0) == 0.0);
  CHECK(t.value(t.sum_cols(va))(0, 0) == 3.0);
  CHECK(t.value(t.mean_cols(va))(1, 0) == 3.5);

  Matrix v(3, 1);
  v << 0.0, 1.0, -1.0;
  Var vv = t.input(v);
  const Matrix sm = t.value(t.softmax_vec(vv));
  CHECK(sm.sum() == doctest::Approx(1.0));
  CHECK(sm(1, 0) > sm(0, 0));
  CHECK(sm(0, 0) > sm(2, 0));

  // softmax is invariant to a constant logit shift
  Var shifted = t.add_const(vv, Matrix::Constant(3, 1, 17.0));
  CHECK((t.value(t.softmax_vec(shifted)) - sm).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tape: cosine of identical, orthogonal and zero columns") {
  Tape t;
  Matrix x(2, 2), y(2, 3);
  x << 1, 0, 0, 2;
  y << 3, 0, 0, 0, 5, 0;  // col0 = (3,0), col1 = (0,5), col2 = (0,0)
  const Matrix c = t.value(t.cosine_columns(t.input(x), t.input(y)));
  CHECK(c(0, 0) == doctest::Approx(1.0));
  CHECK(c(0, 1) == doctest::Approx(0.0));
  CHECK(c(1, 0) == doctest::Approx(0.0));
  CHECK(c(1, 1) == doctest::Approx(1.0));
  CHECK(c(0, 2) == 0.0);  // zero-norm column pins cosine to 0
  CHECK(c(1, 2) == 0.0);
}

TEST_CASE("tape: gradients of every op match central differences") {
  std::mt19937_64 rng(7);
  const Matrix probe_w = random_matrix(3, 4, rng);

  auto check = [&](const char* name,
                   const std::function<Var(Tape&, const std::vector<Matrix>&)>& build,
                   std::vector<Matrix> inputs) {
    const double err = gradient_max_rel_error(build, std::move(inputs));
    INFO(name);
    CHECK(err < 1e-7);
  };

  check("matmul+tanh",
        [&](Tape& t, const std::vector<Matrix>& in) {
          Var a = t.input(in[0]), b = t.input(in[1]);
          return probe(t, t.tanh(t.matmul(a, b)), probe_w);
        },
        {random_matrix(3, 5, rng), random_matrix(5, 4, rng)});

  check("softmax_rows",
        [&](Tape& t, const std::vector<Matrix>& in) {
          return probe(t, t.softmax_rows(t.input(in[0])), probe_w);
        },
        {random_matrix(3, 4, rng, 2.0)});

  check("softmax_vec+log_softmax_vec",
        [&](Tape& t, const std::vector<Matrix>& in) {
          Var a = t.input(in[0]);
          Var s = t.softmax_vec(a);
          Var ls = t.log_softmax_vec(a);
          return t.add(t.pick(s, 1, 0), t.pick(ls, 2, 0));
        },
        {random_matrix(4, 1, rng, 2.0)});

  check("cosine_columns",
        [&](Tape& t, const std::vector<Matrix>& in) {
          Var x = t.input(in[0]), y = t.input(in[1]);
          return probe(t, t.cosine_columns(x, y), probe_w);
        },
        {random_matrix(5, 3, rng), random_matrix(5, 4, rng)});

  const Matrix probe_tall = random_matrix(6, 2, rng);
  check("hcat+vcat+cols",
        [&](Tape& t, const std::vector<Matrix>& in) {
          Var a = t.input(in[0]), b = t.input(in[1]);
          Var h = t.hcat({a, b});
          Var v = t.vcat({t.cols(h, 0, 2), t.cols(h, 2, 2)});
          return probe(t, v, probe_tall);
        },
        {random_matrix(3, 2, rng), random_matrix(3, 2, rng)});

  check("repeat_col+mean_cols+sum_cols",
        [&](Tape& t, const std::vector<Matrix>& in) {
          Var a = t.input(in[0]);
          Var rep = t.repeat_col(a, 4);
          Var m = t.mean_cols(rep);
          Var s = t.sum_cols(rep);
          return t.add(t.pick(m, 0, 0), t.pick(s, 2, 0));
        },
        {random_matrix(3, 1, rng)});

  check("relu+clamp_min+log",
        [&](Tape& t, const std::vector<Matrix>& in) {
          Var a = t.input(in[0]);
          Var r = t.relu(a);
          Var l = t.log(t.clamp_min(a, 0.5));
          return t.add(probe(t, r, probe_w), probe(t, l, probe_w));
        },
        {random_matrix(3, 4, rng).array().abs().matrix() + Matrix::Constant(3, 4, 1.0)});

  check("mul_const+add_const+scale+sub",
        [&](Tape& t, const std::vector<Matrix>& in) {
          Var a = t.input(in[0]), b = t.input(in[1]);
          Var x = t.mul_const(a, probe_w);
          Var y = t.add_const(t.sub(a, b), probe_w * 0.5);
          return probe(t, t.scale(t.add(x, y), 1.7), probe_w);
        },
        {random_matrix(3, 4, rng), random_matrix(3, 4, rng)});
}

TEST_CASE("tape: gradient accumulates over reused vars") {
  Tape t;
  Matrix x(1, 1);
  x << 3.0;
  Var a = t.input(x);
  Var y = t.add(t.matmul(a, a), a);  // x^2 + x
  t.backward(y);
  CHECK(t.grad(a)(0, 0) == doctest::Approx(7.0));  // 2x + 1
}
