#include <gtest/gtest.h>

#include <memory>
#include <vector>

#include "graphrcg/autodiff.hpp"
#include "graphrcg/nn.hpp"
#include "graphrcg/random.hpp"
#include "support/gradcheck.hpp"

namespace ad = graphrcg::ad;
using ad::Matrix;
using ad::Var;
using graphrcg::testing::check_gradients;

namespace {

Matrix random_matrix(graphrcg::Engine& rng, ad::Index r, ad::Index c) {
  Matrix m(r, c);
  for (ad::Index i = 0; i < m.size(); ++i) m.data()[i] = graphrcg::standard_normal(rng);
  return m;
}

// Fixed random projection to a scalar so every output entry gets a distinct weight.
Var project(const Var& x, const Matrix& w) { return ad::sum_all(ad::mul(x, Var(w))); }

}  // namespace

TEST(Autodiff, ElementaryOpsMatchFiniteDifferences) {
  graphrcg::Engine rng(7);
  Var a(random_matrix(rng, 3, 4), true);
  Var b(random_matrix(rng, 4, 2), true);
  Var c(random_matrix(rng, 3, 4), true);
  Var row(random_matrix(rng, 1, 4), true);
  const Matrix w2 = random_matrix(rng, 3, 2);
  const Matrix w4 = random_matrix(rng, 3, 4);

  auto r1 = check_gradients([&] { return project(ad::matmul(a, b), w2); }, {a, b});
  EXPECT_LT(r1.max_rel_error, 1e-6);
  auto r2 = check_gradients([&] { return project(ad::mul(ad::add(a, c), ad::sub(a, c)), w4); }, {a, c});
  EXPECT_LT(r2.max_rel_error, 1e-6);
  auto r3 = check_gradients([&] { return project(ad::add_row(ad::mul_row(a, row), row), w4); }, {a, row});
  EXPECT_LT(r3.max_rel_error, 1e-6);
  auto r4 = check_gradients([&] { return project(ad::silu(ad::scale(a, 1.7)), w4); }, {a});
  EXPECT_LT(r4.max_rel_error, 1e-6);
  auto r5 = check_gradients([&] { return ad::squared_norm(ad::exp(ad::scale(c, 0.3))); }, {c});
  EXPECT_LT(r5.max_rel_error, 1e-6);
  auto r6 = check_gradients([&] { return project(ad::transpose(ad::transpose(a)), w4); }, {a});
  EXPECT_LT(r6.max_rel_error, 1e-6);
}

TEST(Autodiff, NormalizationsMatchFiniteDifferences) {
  graphrcg::Engine rng(11);
  Var a(random_matrix(rng, 5, 3), true);
  const Matrix w = random_matrix(rng, 5, 3);
  EXPECT_LT(check_gradients([&] { return project(ad::softmax_rows(a), w); }, {a}).max_rel_error, 1e-6);
  EXPECT_LT(check_gradients([&] { return project(ad::log_softmax_rows(a), w); }, {a}).max_rel_error, 1e-6);
  EXPECT_LT(check_gradients([&] { return project(ad::layer_norm_rows(a), w); }, {a}).max_rel_error, 1e-5);
  Var blocks(random_matrix(rng, 6, 3), true);
  const Matrix w6 = random_matrix(rng, 6, 3);
  EXPECT_LT(check_gradients([&] { return project(ad::softmax_blocks(blocks, 3), w6); }, {blocks}).max_rel_error,
            1e-6);
}

TEST(Autodiff, IndexingOpsMatchFiniteDifferences) {
  graphrcg::Engine rng(13);
  Var a(random_matrix(rng, 4, 3), true);
  Var b(random_matrix(rng, 4, 2), true);
  const std::vector<ad::Index> idx{3, 0, 0, 2, 1, 3};
  const Matrix w6 = random_matrix(rng, 6, 3);
  EXPECT_LT(check_gradients([&] { return project(ad::gather_rows(a, idx), w6); }, {a}).max_rel_error, 1e-6);
  const Matrix w45 = random_matrix(rng, 4, 5);
  EXPECT_LT(check_gradients([&] { return project(ad::concat_cols(a, b), w45); }, {a, b}).max_rel_error, 1e-6);
  const Matrix w26 = random_matrix(rng, 2, 6);
  EXPECT_LT(check_gradients([&] { return project(ad::reshape(a, 2, 6), w26); }, {a}).max_rel_error, 1e-6);
  const Matrix w42 = random_matrix(rng, 4, 2);
  EXPECT_LT(check_gradients([&] { return project(ad::slice_cols(a, 1, 2), w42); }, {a}).max_rel_error, 1e-6);
  const Matrix w23 = random_matrix(rng, 2, 3);
  EXPECT_LT(check_gradients([&] { return project(ad::segment_sum_rows(a, 2), w23); }, {a}).max_rel_error, 1e-6);
  Var row(random_matrix(rng, 1, 3), true);
  const Matrix w53 = random_matrix(rng, 5, 3);
  EXPECT_LT(check_gradients([&] { return project(ad::broadcast_rows(row, 5), w53); }, {row}).max_rel_error, 1e-6);
  auto targets = std::make_shared<const std::vector<int>>(std::vector<int>{2, -1, 0, 1});
  EXPECT_LT(check_gradients([&] { return ad::negative_pick_sum(ad::log_softmax_rows(a), targets); }, {a})
                .max_rel_error,
            1e-6);
}

TEST(Autodiff, PairProductMatchesLoopAndFiniteDifferences) {
  graphrcg::Engine rng(17);
  const ad::Index n = 3;
  Var a(random_matrix(rng, n * n, 2), true);
  Var b(random_matrix(rng, n * n, 2), true);
  const Matrix out = ad::pair_product(a, b, n).value();
  for (ad::Index c = 0; c < 2; ++c) {
    for (ad::Index i = 0; i < n; ++i) {
      for (ad::Index j = 0; j < n; ++j) {
        double want = 0.0;
        for (ad::Index k = 0; k < n; ++k) want += a.value()(i * n + k, c) * b.value()(k * n + j, c);
        EXPECT_NEAR(out(i * n + j, c), want, 1e-12);
      }
    }
  }
  const Matrix w = random_matrix(rng, n * n, 2);
  EXPECT_LT(check_gradients([&] { return project(ad::pair_product(a, b, n), w); }, {a, b}).max_rel_error, 1e-6);
  EXPECT_LT(check_gradients([&] { return project(ad::pair_product(a, a, n), w); }, {a}).max_rel_error, 1e-6);
}

TEST(Autodiff, GradModeOffRecordsNothing) {
  Var a(Matrix::Ones(2, 2), true);
  {
    ad::GradMode off(false);
    EXPECT_FALSE(ad::grad_enabled());
    EXPECT_EQ(ad::matmul(a, a).node()->parents.size(), 0u);
  }
  EXPECT_TRUE(ad::grad_enabled());
  EXPECT_EQ(ad::matmul(a, a).node()->parents.size(), 2u);
}

TEST(Autodiff, SharedSubexpressionAccumulatesGradient) {
  Var x(Matrix::Constant(1, 1, 3.0), true);
  Var y = ad::mul(x, x);  // x^2
  Var z = ad::add(y, y);  // 2x^2
  z.backward();
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 12.0);
}

TEST(Autodiff, ConstantsBuildNoHistory) {
  Var a(Matrix::Ones(2, 2));
  Var b = ad::matmul(a, a);
  EXPECT_FALSE(b.requires_grad());
  EXPECT_EQ(b.node()->parents.size(), 0u);
}

TEST(Autodiff, ShapeErrorsThrow) {
  Var a(Matrix::Ones(2, 3));
  Var b(Matrix::Ones(2, 3));
  EXPECT_THROW(ad::matmul(a, b), std::invalid_argument);
  EXPECT_THROW(ad::add(a, Var(Matrix::Ones(3, 2))), std::invalid_argument);
  EXPECT_THROW(Var(Matrix::Ones(2, 3), true).backward(), std::logic_error);
}

TEST(NeuralNet, TimestepEmbeddingIsBoundedAndDistinct) {
  const Matrix e = graphrcg::nn::timestep_embedding({1, 2, 500}, 16);
  EXPECT_EQ(e.rows(), 3);
  EXPECT_LE(e.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_GT((e.row(0) - e.row(1)).norm(), 1e-3);
}

TEST(NeuralNet, ParameterHashTracksBits) {
  graphrcg::Engine rng(1);
  graphrcg::nn::ParameterStore store;
  graphrcg::nn::Linear lin(store, "lin", 3, 2, rng);
  const auto h = store.hash();
  EXPECT_EQ(h, store.hash());
  lin.weight.mutable_value()(0, 0) += 1e-12;
  EXPECT_NE(h, store.hash());
}
