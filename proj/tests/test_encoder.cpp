// SPDX-License-Identifier: Apache-2.0
#include "fpflow/encoder.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace fpflow;

TEST(Encoder, IdentityPassesThrough) {
  auto enc = EncoderModel::identity(4);
  Eigen::VectorXd x(4);
  x << 1, 2, 3, 4;
  EXPECT_EQ(enc.encode(x), x);
  EXPECT_TRUE(enc.parameters().empty());
  EXPECT_THROW(enc.set_trainable(true), std::invalid_argument);
}

TEST(Encoder, LinearWithIdentityWeightsPassesThrough) {
  auto enc = EncoderModel::linear(4, 4, 1);
  Eigen::VectorXd x(4);
  x << -1, 0.5, 3, 8;
  EXPECT_EQ(enc.encode(x), x);
  ASSERT_EQ(enc.parameters().size(), 2u);
}

TEST(Encoder, MlpShapesAndDeterminism) {
  auto a = EncoderModel::mlp(6, 4, 21);
  auto b = EncoderModel::mlp(6, 4, 21);
  EXPECT_EQ(a.network().weights[0].cols(), 8);  // 2 * out_dim hidden units
  Rng rng(3);
  Eigen::VectorXd x = normal_matrix(6, 1, rng);
  const Eigen::VectorXd e1 = a.encode(x);
  const Eigen::VectorXd e2 = a.encode(x);
  EXPECT_EQ(e1.size(), 4);
  EXPECT_EQ(std::memcmp(e1.data(), e2.data(), sizeof(double) * 4), 0);
  EXPECT_EQ(b.encode(x), e1);
}

TEST(Encoder, RejectsBadDimensions) {
  EXPECT_THROW(EncoderModel::mlp(6, 3, 0), std::invalid_argument);
  EXPECT_THROW(EncoderModel::create(EncoderKind::identity, 4, 6, 0), std::invalid_argument);
  auto enc = EncoderModel::mlp(6, 4, 0);
  EXPECT_THROW(enc.encode(Eigen::VectorXd::Zero(5)), std::invalid_argument);
}

TEST(Encoder, TapedEncodeMatchesEager) {
  auto enc = EncoderModel::mlp(5, 2, 4);
  Rng rng(9);
  Tensor x = normal_matrix(7, 5, rng);
  Tape tape;
  auto ids = bind_parameters(tape, enc.parameters(), true);
  auto out = taped_encode(tape, tape.constant(x), enc, ids);
  EXPECT_TRUE(tape.value(out).isApprox(enc.encode_batch(x), 1e-14));
}

TEST(Encoder, KindRoundTripsThroughText) {
  for (auto k : {EncoderKind::identity, EncoderKind::linear, EncoderKind::mlp}) {
    EXPECT_EQ(parse_encoder_kind(to_string(k)), k);
  }
  EXPECT_FALSE(parse_encoder_kind("resnet").has_value());
}
