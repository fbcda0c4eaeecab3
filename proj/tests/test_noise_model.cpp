#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "graphrcg/noise.hpp"

using namespace graphrcg;
using ad::Matrix;

namespace {

Eigen::VectorXd random_simplex(Engine& rng, int k) {
  Eigen::VectorXd p(k);
  for (int i = 0; i < k; ++i) p(i) = 0.05 + uniform01(rng);
  return p / p.sum();
}

// Product Q_1 ... Q_t built step by step, never touching the closed form.
Matrix explicit_product(const NoiseSchedule& sch, int t, const Eigen::VectorXd& p) {
  const auto k = p.size();
  Matrix acc = Matrix::Identity(k, k);
  for (int i = 1; i <= t; ++i) {
    const double a = sch.alpha(i);
    Matrix q(k, k);
    for (Eigen::Index r = 0; r < k; ++r) {
      for (Eigen::Index c = 0; c < k; ++c) q(r, c) = (r == c ? a : 0.0) + (1.0 - a) * p(c);
    }
    acc = acc * q;
  }
  return acc;
}

double chi2_statistic(const std::vector<double>& counts, const Eigen::VectorXd& p, double total) {
  double chi2 = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double e = total * p(static_cast<Eigen::Index>(k));
    chi2 += (counts[k] - e) * (counts[k] - e) / e;
  }
  return chi2;
}

double chi2_critical(int df) {
  return boost::math::quantile(boost::math::chi_squared(df), 0.99);
}

// p(x_{t-1} | x_t) mixed over x_0 ~ pred, by enumerating the joint
// (x_0, x_{t-1}, x_t) with explicit kernel products and conditioning.
Eigen::VectorXd bayes_posterior(int xt, const Eigen::VectorXd& pred, const NoiseSchedule& sch, int t,
                                const Eigen::VectorXd& p) {
  const auto k = p.size();
  const Matrix cum_prev = explicit_product(sch, t - 1, p);
  Matrix q_t(k, k);
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index c = 0; c < k; ++c) q_t(r, c) = (r == c ? sch.alpha(t) : 0.0) + (1.0 - sch.alpha(t)) * p(c);
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(k);
  for (Eigen::Index x0 = 0; x0 < k; ++x0) {
    Eigen::VectorXd joint(k);
    for (Eigen::Index xs = 0; xs < k; ++xs) joint(xs) = cum_prev(x0, xs) * q_t(xs, xt);
    out += pred(x0) * joint / joint.sum();
  }
  return out;
}

}  // namespace

TEST(NoiseSchedule, CosineFormulaValues) {
  // Raw formula at t = 0 with s = 0.008.
  const double x = 0.5 * std::acos(-1.0) * 0.008 / 1.008;
  EXPECT_NEAR(cosine_alpha_bar(0, 1000, 0.008), std::cos(x) * std::cos(x), 1e-15);
  EXPECT_NEAR(cosine_alpha_bar(0, 1000, 0.008), 0.99984, 1e-5);
  EXPECT_DOUBLE_EQ(cosine_alpha_bar(1000, 1000, 0.008), kAlphaBarFloor);
  const NoiseSchedule sch(1000);
  EXPECT_DOUBLE_EQ(sch.alpha_bar(1000), kAlphaBarFloor);
  EXPECT_DOUBLE_EQ(sch.alpha_bar(0), 1.0);
}

TEST(NoiseSchedule, StrictlyDecreasingAndConverged) {
  for (int T : {1, 10, 500, 1000}) {
    const NoiseSchedule sch(T);
    for (int t = 1; t <= T; ++t) {
      EXPECT_LT(sch.alpha_bar(t), sch.alpha_bar(t - 1));
      EXPECT_GT(sch.alpha(t), 0.0);
      EXPECT_LE(sch.alpha(t), 1.0);
    }
    EXPECT_LT(sch.alpha_bar(T), 1e-4);
  }
}

TEST(NoiseSchedule, RejectsBadParameters) {
  EXPECT_THROW(NoiseSchedule(0), std::invalid_argument);
  EXPECT_THROW(NoiseSchedule(10, 0.0), std::invalid_argument);
  EXPECT_THROW(NoiseSchedule(10).alpha(0), std::out_of_range);
  EXPECT_THROW(NoiseSchedule(10).alpha_bar(11), std::out_of_range);
}

TEST(TransitionMatrix, HandExamples) {
  const Eigen::Vector2d p(0.75, 0.25);
  const Matrix half = mix_with_stationary(0.5, p);
  EXPECT_NEAR(half(0, 0), 0.875, 1e-15);
  EXPECT_NEAR(half(0, 1), 0.125, 1e-15);
  EXPECT_NEAR(half(1, 0), 0.375, 1e-15);
  EXPECT_NEAR(half(1, 1), 0.625, 1e-15);
  EXPECT_TRUE(mix_with_stationary(1.0, p).isApprox(Matrix::Identity(2, 2)));
  const Matrix jump = mix_with_stationary(0.0, p);
  for (int r = 0; r < 2; ++r) EXPECT_TRUE(jump.row(r).transpose().isApprox(Eigen::VectorXd(p)));
  EXPECT_THROW(transition_matrix(NoiseSchedule(10), 1, Eigen::Vector2d(0.5, 0.6)), std::invalid_argument);
}

TEST(TransitionMatrix, ClosedFormMatchesExplicitProduct) {
  Engine rng(5);
  const NoiseSchedule sch(50);
  for (int k = 1; k <= 5; ++k) {
    const Eigen::VectorXd p = random_simplex(rng, k);
    for (int t = 0; t <= 10; ++t) {
      const Matrix closed = cumulative_transition(sch, t, p);
      EXPECT_LT((closed - explicit_product(sch, t, p)).cwiseAbs().maxCoeff(), 1e-8) << "k=" << k << " t=" << t;
      for (Eigen::Index r = 0; r < k; ++r) {
        EXPECT_NEAR(closed.row(r).sum(), 1.0, 1e-9);
        EXPECT_GE(closed.row(r).minCoeff(), 0.0);
      }
    }
  }
  const Eigen::VectorXd p = random_simplex(rng, 3);
  EXPECT_TRUE(cumulative_transition(sch, 0, p).isApprox(Matrix::Identity(3, 3)));
  const Matrix last = cumulative_transition(sch, 50, p);
  for (int r = 0; r < 3; ++r) EXPECT_LT((last.row(r).transpose() - p).cwiseAbs().maxCoeff(), 1e-4);
  // Skip kernel composes with the prefix to the full product.
  EXPECT_LT((cumulative_transition(sch, 3, p) * skip_transition(sch, 3, 9, p) - cumulative_transition(sch, 9, p))
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(NoiseGraph, IdentityKernelReproducesGraph) {
  Engine rng(2);
  const GraphSample g = GraphSample::from_edges(3, 3, {0, 2, 1, 1}, {{0, 1, 2}, {2, 3, 1}});
  const GraphNoiseModel model(NoiseSchedule(10), compute_marginals({g}));
  // Full retention (alpha_bar = 1) is the cumulative kernel at t = 0.
  const Matrix qx = cumulative_transition(model.schedule, 0, model.node_pi);
  const Matrix qe = cumulative_transition(model.schedule, 0, model.edge_pi);
  for (int k = 0; k < 20; ++k) EXPECT_EQ(noise_graph_with_kernels(g, qx, qe, rng), g);
  EXPECT_THROW(noise_graph(g, 0, model, rng), std::out_of_range);
}

TEST(NoiseGraph, StationaryFrequenciesAtFinalStep) {
  const Eigen::Vector3d px(0.5, 0.3, 0.2);
  const Eigen::Vector3d pe(0.6, 0.25, 0.15);
  Marginals m{px, pe};
  const GraphNoiseModel model(NoiseSchedule(100), m);
  const GraphSample g = GraphSample::from_edges(3, 3, {2, 2}, {{0, 1, 2}});
  std::vector<double> node_counts(3, 0.0), edge_counts(3, 0.0);
  Engine rng(77);
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) {
    const GraphSample gt = noise_graph(g, 100, model, rng);
    node_counts[static_cast<std::size_t>(gt.node(0))] += 1.0;
    edge_counts[static_cast<std::size_t>(gt.edge(0, 1))] += 1.0;
  }
  EXPECT_LT(chi2_statistic(node_counts, px, draws), chi2_critical(2));
  EXPECT_LT(chi2_statistic(edge_counts, pe, draws), chi2_critical(2));
}

TEST(NoiseGraph, IntermediateMarginalsMatchCumulativeKernel) {
  Engine rng(8);
  const Eigen::VectorXd px = random_simplex(rng, 4);
  const Eigen::VectorXd pe = random_simplex(rng, 2);
  const GraphNoiseModel model(NoiseSchedule(200), Marginals{px, pe});
  const GraphSample g = GraphSample::from_edges(4, 2, {1, 3, 0}, {{0, 2, 1}});
  const int t = 60;
  const Matrix qx = cumulative_transition(model.schedule, t, px);
  std::vector<double> counts(4, 0.0);
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) counts[static_cast<std::size_t>(noise_graph(g, t, model, rng).node(1))] += 1.0;
  EXPECT_LT(chi2_statistic(counts, qx.row(3).transpose(), draws), chi2_critical(3));
}

TEST(NoiseGraph, OutputsAlwaysValid) {
  Engine rng(4);
  const GraphSample g = GraphSample::from_edges(2, 3, {0, 1, 1, 0, 1}, {{0, 1, 1}, {1, 4, 2}, {2, 3, 1}});
  const GraphNoiseModel model(NoiseSchedule(30), compute_marginals({g}));
  for (int t = 1; t <= 30; ++t) {
    const GraphSample gt = noise_graph(g, t, model, rng);
    // Re-running the validating constructor on the raw data must not throw.
    EXPECT_NO_THROW(GraphSample(gt.node_types(), gt.edge_types(), gt.nodes(), gt.edges()));
  }
}

TEST(NoiseGraph, DistributionLevelPermutationEquivariance) {
  Engine rng(12);
  const GraphSample g = GraphSample::from_edges(3, 3, {0, 1, 2, 2, 0}, {{0, 1, 1}, {1, 2, 2}, {3, 4, 1}});
  const GraphNoiseModel model(NoiseSchedule(40), compute_marginals({g}));
  const std::vector<int> perm{3, 0, 4, 1, 2};
  const GraphSample gp = g.permuted(perm);
  const int t = 15, draws = 6000;
  Matrix h(5, 3), hp(5, 3), he(25, 3), hep(25, 3);
  h.setZero();
  hp.setZero();
  he.setZero();
  hep.setZero();
  for (int k = 0; k < draws; ++k) {
    const GraphSample a = noise_graph(g, t, model, derive_seed(1, static_cast<std::uint64_t>(k)));
    const GraphSample b = noise_graph(gp, t, model, derive_seed(2, static_cast<std::uint64_t>(k)));
    for (int i = 0; i < 5; ++i) {
      h(i, a.node(i)) += 1;
      hp(i, b.node(i)) += 1;
      for (int j = 0; j < 5; ++j) {
        he(i * 5 + j, a.edge(i, j)) += 1;
        hep(i * 5 + j, b.edge(i, j)) += 1;
      }
    }
  }
  // Node i of the permuted chain corresponds to node perm[i] of the original.
  const double tol = 5.0 * std::sqrt(0.25 / draws) * std::sqrt(2.0);
  for (int i = 0; i < 5; ++i) {
    EXPECT_LT((hp.row(i) - h.row(perm[static_cast<std::size_t>(i)])).cwiseAbs().maxCoeff() / draws, tol);
    for (int j = 0; j < 5; ++j) {
      const int oi = perm[static_cast<std::size_t>(i)], oj = perm[static_cast<std::size_t>(j)];
      EXPECT_LT((hep.row(i * 5 + j) - he.row(oi * 5 + oj)).cwiseAbs().maxCoeff() / draws, tol);
    }
  }
}

TEST(NoiseRepresentation, ZeroNoiseAndLimit) {
  const NoiseSchedule sch(100);
  const Eigen::Vector3d h0(1.0, -2.0, 0.5);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
  EXPECT_TRUE(noise_representation_with(h0, 10, sch, zero).isApprox(std::sqrt(sch.alpha_bar(10)) * h0));
  const Eigen::Vector3d eps(0.3, 0.1, -0.7);
  EXPECT_LT((noise_representation_with(h0, 100, sch, eps) - eps).cwiseAbs().maxCoeff(), 1e-4);
  const auto a = noise_representation(h0, 40, sch, 9);
  const auto b = noise_representation(h0, 40, sch, 9);
  EXPECT_EQ(a.noised, b.noised);
  EXPECT_TRUE(a.noised.isApprox(noise_representation_with(h0, 40, sch, a.noise)));
}

TEST(NoiseRepresentation, MonteCarloMoments) {
  const NoiseSchedule sch(100);
  const Eigen::Vector4d h0(1.0, -1.5, 0.0, 3.0);
  const int t = 35, draws = 10000;
  Engine rng(2026);
  Eigen::Vector4d sum = Eigen::Vector4d::Zero(), sq = Eigen::Vector4d::Zero();
  for (int k = 0; k < draws; ++k) {
    const Eigen::VectorXd x = noise_representation(h0, t, sch, rng).noised;
    sum += x;
    sq += x.cwiseProduct(x);
  }
  const Eigen::Vector4d mean = sum / draws;
  const double var_true = 1.0 - sch.alpha_bar(t);
  for (int c = 0; c < 4; ++c) {
    const double var = (sq(c) - draws * mean(c) * mean(c)) / (draws - 1);
    EXPECT_NEAR(mean(c), std::sqrt(sch.alpha_bar(t)) * h0(c), 3.0 * std::sqrt(var_true / draws));
    EXPECT_NEAR(var, var_true, 3.0 * std::sqrt(2.0 / (draws - 1)) * var_true);
  }
}

TEST(ReversePosterior, MatchesExhaustiveBayes) {
  Engine rng(21);
  const NoiseSchedule sch(20);
  for (int t : {1, 2, 5}) {
    const Eigen::VectorXd px = random_simplex(rng, 2);
    const Eigen::VectorXd pe = random_simplex(rng, 2);
    const GraphNoiseModel model(sch, Marginals{px, pe});
    const GraphSample gt = GraphSample::from_edges(2, 2, {0, 1, 1}, {{0, 2, 1}});
    DistributionPair pred;
    pred.node.resize(3, 2);
    pred.edge = Matrix::Zero(9, 2);
    for (int i = 0; i < 3; ++i) pred.node.row(i) = random_simplex(rng, 2).transpose();
    for (int i = 0; i < 3; ++i) {
      pred.edge(i * 3 + i, 0) = 1.0;
      for (int j = i + 1; j < 3; ++j) {
        pred.edge.row(i * 3 + j) = random_simplex(rng, 2).transpose();
        pred.edge.row(j * 3 + i) = pred.edge.row(i * 3 + j);
      }
    }
    const DistributionPair post = reverse_posterior(gt, pred, t, model);
    post.validate(1e-9);
    for (int i = 0; i < 3; ++i) {
      const Eigen::VectorXd want = bayes_posterior(gt.node(i), pred.node.row(i).transpose(), sch, t, px);
      EXPECT_LT((post.node.row(i).transpose() - want).cwiseAbs().maxCoeff(), 1e-10) << "t=" << t;
      for (int j = i + 1; j < 3; ++j) {
        const Eigen::VectorXd we = bayes_posterior(gt.edge(i, j), pred.edge.row(i * 3 + j).transpose(), sch, t, pe);
        EXPECT_LT((post.edge.row(i * 3 + j).transpose() - we).cwiseAbs().maxCoeff(), 1e-10) << "t=" << t;
      }
    }
  }
}

TEST(ReversePosterior, OneHotPredictionUnderIdentityKernelsIsOneHot) {
  const Eigen::Vector2d pi(0.4, 0.6);
  const Matrix id = mix_with_stationary(1.0, pi);
  const Eigen::Vector2d pred(0.0, 1.0);
  Eigen::VectorXd w = posterior_weights(1, pred, id, id, id);
  w /= w.sum();
  EXPECT_DOUBLE_EQ(w(1), 1.0);
  EXPECT_DOUBLE_EQ(w(0), 0.0);
}

TEST(ReversePosterior, AbsorbingKernelSkipsImpossibleCleanStates) {
  const GraphSample g = GraphSample::from_edges(2, 2, {1, 0}, {{0, 1, 1}});
  const GraphNoiseModel model(NoiseSchedule(10), compute_marginals({g}), KernelKind::Absorbing);
  // State 1 at time t can only come from x0 = 1.
  DistributionPair pred;
  pred.node = Matrix::Constant(2, 2, 0.5);
  pred.edge = Matrix::Zero(4, 2);
  pred.edge(0, 0) = pred.edge(3, 0) = 1.0;
  pred.edge.row(1) << 0.5, 0.5;
  pred.edge.row(2) << 0.5, 0.5;
  const DistributionPair post = reverse_posterior(g, pred, 4, model);
  EXPECT_DOUBLE_EQ(post.node(0, 1), 1.0);
  post.validate(1e-12);
}
