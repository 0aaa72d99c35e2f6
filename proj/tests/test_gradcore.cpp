// SPDX-License-Identifier: Apache-2.0
#include "fpflow/grad/tape.hpp"
#include "fpflow/random.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using fpflow::grad::Axis;
using fpflow::grad::NodeId;
using fpflow::grad::Tape;
using fpflow::grad::Tensor;

namespace {

Tensor scalar(double v) { return Tensor::Constant(1, 1, v); }

}  // namespace

TEST(Tape, AddIsArithmetic) {
  Tape t;
  auto x = t.variable(scalar(2.0));
  auto y = t.variable(scalar(3.0));
  EXPECT_EQ(t.scalar(t.add(x, y)), 5.0);
}

TEST(Tape, ExpOfZeroIsOne) {
  Tape t;
  EXPECT_EQ(t.scalar(t.exp(t.variable(scalar(0.0)))), 1.0);
}

TEST(Tape, MatmulMatchesHandComputation) {
  Tape t;
  Tensor a(2, 3), b(3, 1);
  a << 1, 2, 3,
       4, 5, 6;
  b << 7, 8, 9;
  const Tensor& c = t.value(t.matmul(t.constant(a), t.constant(b)));
  ASSERT_EQ(c.rows(), 2);
  ASSERT_EQ(c.cols(), 1);
  EXPECT_EQ(c(0, 0), 1 * 7 + 2 * 8 + 3 * 9);  // 50
  EXPECT_EQ(c(1, 0), 4 * 7 + 5 * 8 + 6 * 9);  // 122
}

TEST(Tape, ShapeMismatchReportsShapes) {
  Tape t;
  auto a = t.constant(Tensor::Zero(2, 3));
  auto b = t.constant(Tensor::Zero(2, 3));
  try {
    t.matmul(a, b);
    FAIL() << "expected rejection";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("2x3, 2x3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(t.add(a, t.constant(Tensor::Zero(3, 3))), std::invalid_argument);
  EXPECT_THROW(t.mul(a, t.constant(Tensor::Zero(1, 3))), std::invalid_argument);
  EXPECT_THROW(t.slice(a, 2, 2), std::invalid_argument);
  EXPECT_THROW(t.concat(a, t.constant(Tensor::Zero(1, 3))), std::invalid_argument);
  EXPECT_THROW(t.record(fpflow::grad::Op::leaf, {a}), std::invalid_argument);
  EXPECT_THROW(t.record(fpflow::grad::Op::exp, {a, b}), std::invalid_argument);
  EXPECT_THROW(t.exp(NodeId{99}), std::out_of_range);
}

TEST(Tape, BiasBroadcastAdd) {
  Tape t;
  Tensor x(2, 2), b(1, 2);
  x << 1, 2, 3, 4;
  b << 10, 20;
  auto xs = t.variable(x);
  auto bs = t.variable(b);
  auto y = t.add(xs, bs);
  Tensor expected(2, 2);
  expected << 11, 22, 13, 24;
  EXPECT_EQ(t.value(y), expected);
  t.backward(t.sum(y));
  EXPECT_EQ(t.grad(bs), (Tensor(1, 2) << 2, 2).finished());
  EXPECT_EQ(t.grad(xs), Tensor::Ones(2, 2));
}

TEST(Backward, SquareDerivative) {
  Tape t;
  auto x = t.variable(scalar(3.0));
  t.backward(t.mul(x, x));
  EXPECT_EQ(t.grad(x)(0, 0), 6.0);
}

TEST(Backward, SumOfExp) {
  Tape t;
  auto v = t.variable(Tensor::Zero(1, 2));
  t.backward(t.sum(t.exp(v)));
  EXPECT_EQ(t.grad(v), Tensor::Ones(1, 2));
}

TEST(Backward, RejectsNonScalarLoss) {
  Tape t;
  auto v = t.variable(Tensor::Zero(2, 1));
  EXPECT_THROW(t.backward(v), std::invalid_argument);
}

TEST(Backward, RepeatedCallIsIdempotent) {
  Tape t;
  auto x = t.variable(scalar(1.5));
  auto loss = t.sum(t.tanh(t.mul(x, x)));
  t.backward(loss);
  const double g1 = t.grad(x)(0, 0);
  t.backward(loss);
  EXPECT_EQ(t.grad(x)(0, 0), g1);
}

TEST(Backward, ConstantsGetZeroGradient) {
  Tape t;
  auto c = t.constant(scalar(2.0));
  auto x = t.variable(scalar(3.0));
  t.backward(t.mul(c, x));
  EXPECT_FALSE(t.requires_grad(c));
  EXPECT_EQ(t.grad(c)(0, 0), 0.0);
  EXPECT_EQ(t.grad(x)(0, 0), 2.0);
}

TEST(Backward, MaxWithConstantUsesZeroSubgradientAtKink) {
  Tape t;
  Tensor v(1, 3);
  v << -1.0, 0.0, 2.0;
  auto x = t.variable(v);
  t.backward(t.sum(t.max_with(x, 0.0)));
  EXPECT_EQ(t.grad(x), (Tensor(1, 3) << 0.0, 0.0, 1.0).finished());
}

TEST(Backward, ParentsPrecedeChildren) {
  Tape t;
  auto a = t.variable(Tensor::Ones(2, 2));
  auto b = t.concat(t.slice(a, 0, 1), t.exp(a));
  t.sum(t.mean(b, Axis::row));
  for (NodeId i = 0; i < t.size(); ++i) {
    const auto& n = t.node(i);
    for (std::size_t k = 0; k < n.arity; ++k) EXPECT_LT(n.parents[k], i);
  }
}

namespace {

// A graph that touches every operation; parameters are five small tensors.
struct RandomGraph {
  std::vector<Tensor> params;

  explicit RandomGraph(std::uint64_t seed) {
    fpflow::Rng rng(seed);
    params.push_back(fpflow::uniform_matrix(4, 3, 1.0, rng));  // x
    params.push_back(fpflow::uniform_matrix(3, 4, 0.7, rng));  // w
    params.push_back(fpflow::uniform_matrix(1, 4, 0.5, rng));  // bias
    params.push_back(fpflow::uniform_matrix(4, 2, 0.5, rng));  // u
    params.push_back(fpflow::uniform_matrix(4, 2, 0.5, rng));  // v
  }

  NodeId build(Tape& t, std::vector<NodeId>& ids) const {
    ids.clear();
    for (const auto& p : params) ids.push_back(t.variable(p));
    auto h = t.tanh(t.add(t.matmul(ids[0], ids[1]), ids[2]));         // 4x4
    auto left = t.slice(h, 0, 2);
    auto right = t.slice(h, 2, 2);
    auto mixed = t.mul(t.exp(t.scale(left, 0.5)), t.sub(right, ids[3]));
    auto joined = t.concat(mixed, t.max_with(ids[4], 0.1));
    auto rows = t.mean(t.mul(joined, joined), Axis::row);              // 4x1
    auto hinge = t.max_with(t.sub(rows, t.constant(Tensor::Constant(4, 1, 0.05))), 0.0);
    return t.add(t.mean(hinge), t.scale(t.sum(rows, Axis::all), 0.3));
  }

  double eval() const {
    Tape t;
    std::vector<NodeId> ids;
    return t.scalar(build(t, ids));
  }
};

}  // namespace

TEST(Backward, MatchesFiniteDifferencesOnRandomGraphs) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    RandomGraph g(seed);
    Tape t;
    std::vector<NodeId> ids;
    t.backward(g.build(t, ids));
    for (std::size_t p = 0; p < g.params.size(); ++p) {
      for (Eigen::Index k = 0; k < g.params[p].size(); ++k) {
        const double numeric =
            oracle::fd_scalar([&] { return g.eval(); }, g.params[p].data()[k]);
        const double analytic = t.grad(ids[p]).data()[k];
        EXPECT_TRUE(oracle::grad_close(analytic, numeric))
            << "seed " << seed << " param " << p << " entry " << k << ": " << analytic
            << " vs " << numeric;
      }
    }
  }
}

TEST(Tape, ForwardIsDeterministic) {
  RandomGraph g(7);
  EXPECT_EQ(g.eval(), g.eval());
}
