// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>
#include <set>

#include "form/model.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace form;
using form::test::gradient_max_rel_error;
using form::test::random_matrix;
namespace oracle = form::test::oracle;

TEST_CASE("score_responses: zero scorer weights give a uniform distribution") {
  std::mt19937_64 rng(1);
  const int d = 3, d_t = 4, N = 5;
  Tape t;
  Var alpha = ops::score_responses(t, t.input(random_matrix(d, 1, rng)),
                                   t.input(random_matrix(d_t, N, rng)),
                                   t.input(random_matrix(d, d_t, rng)),
                                   t.input(Matrix::Zero(1, 2 * d)));
  const Matrix a = t.value(alpha);
  CHECK(a.sum() == doctest::Approx(1.0));
  for (int i = 0; i < N; ++i) CHECK(a(0, i) == doctest::Approx(1.0 / N));
}

TEST_CASE("score_responses: identical responses share identical weight") {
  std::mt19937_64 rng(2);
  const int d = 3, d_t = 4, N = 4;
  Matrix z = random_matrix(d_t, N, rng);
  z.col(2) = z.col(0);  // responses 0 and 2 identical
  Tape t;
  const Matrix a = t.value(ops::score_responses(t, t.input(random_matrix(d, 1, rng)), t.input(z),
                                                t.input(random_matrix(d, d_t, rng)),
                                                t.input(random_matrix(1, 2 * d, rng))));
  CHECK(a(0, 0) == doctest::Approx(a(0, 2)).epsilon(1e-12));
  CHECK(a.sum() == doctest::Approx(1.0));
}

TEST_CASE("selection: random N=3 instance matches the softmax-of-affine oracle") {
  std::mt19937_64 rng(3);
  const int d = 3, d_t = 4, d_h = 5, N = 3;
  const Matrix s_m = random_matrix(d, 1, rng);
  const Matrix z = random_matrix(d_t, N, rng);
  const Matrix wz = random_matrix(d, d_t, rng);
  const Matrix wa = random_matrix(1, 2 * d, rng);
  const Matrix w1 = random_matrix(d_h, d_t, rng);
  const Matrix b1 = random_matrix(d_h, 1, rng);
  const Matrix w2 = random_matrix(4, d_h, rng);
  const Matrix b2 = random_matrix(4, 1, rng);

  Tape t;
  Var alpha = ops::score_responses(t, t.input(s_m), t.input(z), t.input(wz), t.input(wa));
  Var y1 = ops::aux_predict(t, alpha, t.input(z), t.input(w1), t.input(b1), t.input(w2),
                            t.input(b2));
  const oracle::SelectionResult ref = oracle::selection(s_m, z, wz, wa, w1, b1, w2, b2);
  CHECK((t.value(alpha) - ref.alpha).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((t.value(y1) - ref.y1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("aux_predict: one-hot weights pool a single sentence feature") {
  std::mt19937_64 rng(4);
  const int d_t = 4, d_h = 3, N = 3;
  const Matrix z = random_matrix(d_t, N, rng);
  Matrix alpha = Matrix::Zero(1, N);
  alpha(0, 1) = 1.0;
  Tape t;
  Var pooled = t.matmul(t.input(z), t.transpose(t.input(alpha)));
  CHECK((t.value(pooled) - z.col(1)).cwiseAbs().maxCoeff() == 0.0);

  // zero MLP weights: logits equal the output bias
  const Matrix b2 = random_matrix(4, 1, rng);
  Var y1 = ops::aux_predict(t, t.input(alpha), t.input(z), t.input(Matrix::Zero(d_h, d_t)),
                            t.input(Matrix::Zero(d_h, 1)), t.input(Matrix::Zero(4, d_h)),
                            t.input(b2));
  CHECK((t.value(y1) - b2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("select_top_k: ordering, ties, masks and validation") {
  Matrix alpha(1, 3);
  alpha << 0.5, 0.3, 0.2;
  const std::vector<bool> all_real{true, true, true};

  CHECK(ops::select_top_k(alpha, all_real, 2) == std::vector<int>{0, 1});
  CHECK(ops::select_top_k(alpha, all_real, 3) == std::vector<int>{0, 1, 2});
  CHECK(ops::select_top_k(alpha, all_real, 10) == std::vector<int>{0, 1, 2});  // fewer real than k

  Matrix tied(1, 3);
  tied << 0.4, 0.4, 0.2;
  CHECK(ops::select_top_k(tied, all_real, 1) == std::vector<int>{0});  // lowest index wins

  // padded slots never get selected
  const std::vector<bool> with_pad{true, false, true};
  CHECK(ops::select_top_k(alpha, with_pad, 2) == std::vector<int>{0, 2});

  CHECK_THROWS_AS(ops::select_top_k(alpha, all_real, 0), ParamError);
}

TEST_CASE("select_top_k: growing k extends the previous selection") {
  std::mt19937_64 rng(5);
  const Matrix raw = random_matrix(1, 8, rng);
  Tape t;
  const Matrix alpha = t.value(t.softmax_rows(t.input(raw)));
  const std::vector<bool> mask(8, true);
  std::vector<int> prev;
  for (int k = 1; k <= 8; ++k) {
    std::vector<int> cur = ops::select_top_k(alpha, mask, k);
    REQUIRE(cur.size() == static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < prev.size(); ++i) CHECK(cur[i] == prev[i]);
    prev = cur;
  }
}

TEST_CASE("selection: permuting responses permutes alpha and keeps the pooled logits") {
  std::mt19937_64 rng(6);
  const int d = 3, d_t = 5, d_h = 4, N = 4;
  const Matrix s_m = random_matrix(d, 1, rng);
  const Matrix z = random_matrix(d_t, N, rng);
  const Matrix wz = random_matrix(d, d_t, rng);
  const Matrix wa = random_matrix(1, 2 * d, rng);
  const Matrix w1 = random_matrix(d_h, d_t, rng);
  const Matrix b1 = random_matrix(d_h, 1, rng);
  const Matrix w2 = random_matrix(4, d_h, rng);
  const Matrix b2 = random_matrix(4, 1, rng);

  const std::vector<int> perm{2, 0, 3, 1};
  Matrix z_perm(d_t, N);
  for (int i = 0; i < N; ++i) z_perm.col(i) = z.col(perm[static_cast<std::size_t>(i)]);

  Tape t;
  Var a0 = ops::score_responses(t, t.input(s_m), t.input(z), t.input(wz), t.input(wa));
  Var y0 = ops::aux_predict(t, a0, t.input(z), t.input(w1), t.input(b1), t.input(w2), t.input(b2));
  Var a1 = ops::score_responses(t, t.input(s_m), t.input(z_perm), t.input(wz), t.input(wa));
  Var y1 = ops::aux_predict(t, a1, t.input(z_perm), t.input(w1), t.input(b1), t.input(w2),
                            t.input(b2));

  for (int i = 0; i < N; ++i) {
    CHECK(t.value(a1)(0, i) ==
          doctest::Approx(t.value(a0)(0, perm[static_cast<std::size_t>(i)])).epsilon(1e-12));
  }
  CHECK((t.value(y1) - t.value(y0)).cwiseAbs().maxCoeff() < 1e-6);

  // the selected set, tracked by thread-local response identity, is stable
  const std::vector<bool> mask(N, true);
  std::vector<int> sel0 = ops::select_top_k(t.value(a0), mask, 2);
  std::vector<int> sel1 = ops::select_top_k(t.value(a1), mask, 2);
  std::set<int> ids0, ids1;
  for (int i : sel0) ids0.insert(i);
  for (int i : sel1) ids1.insert(perm[static_cast<std::size_t>(i)]);
  CHECK(ids0 == ids1);
}

TEST_CASE("selection: softmax normalization holds for wild inputs") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 3, d_t = 4, N = 6;
    const double scale = trial % 2 == 0 ? 1.0 : 50.0;
    Tape t;
    Var alpha = ops::score_responses(t, t.input(random_matrix(d, 1, rng, scale)),
                                     t.input(random_matrix(d_t, N, rng, scale)),
                                     t.input(random_matrix(d, d_t, rng, scale)),
                                     t.input(random_matrix(1, 2 * d, rng, scale)));
    const Matrix a = t.value(alpha);
    CHECK(std::abs(a.sum() - 1.0) < 1e-6);
    CHECK(a.minCoeff() >= 0.0);
  }
}

TEST_CASE("selection: composite gradient matches central differences (N=4, d=6)") {
  std::mt19937_64 rng(8);
  const int d = 6, d_t = 5, d_h = 4, N = 4;
  std::vector<Matrix> inputs = {
      random_matrix(d, 1, rng),    random_matrix(d_t, N, rng), random_matrix(d, d_t, rng),
      random_matrix(1, 2 * d, rng), random_matrix(d_h, d_t, rng), random_matrix(d_h, 1, rng),
      random_matrix(4, d_h, rng),  random_matrix(4, 1, rng),
  };
  const double err = gradient_max_rel_error(
      [&](Tape& t, const std::vector<Matrix>& in) {
        // Leaves in input order (argument lists have no sequencing guarantee).
        std::vector<Var> lv;
        for (const Matrix& m : in) lv.push_back(t.input(m));
        Var alpha = ops::score_responses(t, lv[0], lv[1], lv[2], lv[3]);
        Var y1 = ops::aux_predict(t, alpha, lv[1], lv[4], lv[5], lv[6], lv[7]);
        return ops::cross_entropy_from_logits(t, y1, RumorLabel::kTrueRumor);
      },
      inputs);
  CHECK(err < 1e-4);
}
