#include <gtest/gtest.h>

#include "daan/attention.hpp"
#include "daan/error.hpp"
#include "test_util.hpp"

using namespace daan;

TEST(Cam, HandSum) {
  const auto spatial = torch::ones({2, 2, 2});
  const auto w = torch::tensor({0.3f, -0.1f});
  EXPECT_TRUE(torch::allclose(compute_cam(spatial, w), torch::full({2, 2}, 0.2f)));
  EXPECT_TRUE(torch::equal(compute_cam(torch::rand({2, 3, 3}), torch::zeros({2})), torch::zeros({3, 3})));
  EXPECT_THROW(compute_cam(spatial, torch::zeros({3})), ShapeError);
}

TEST(Cam, MeanEqualsLogitMinusBias) {
  const auto schema = test::toy_schema();
  for (int draw = 0; draw < 20; ++draw) {
    torch::manual_seed(draw);
    GroupHeads heads(schema, 8, true);
    const FeatureBundle f{torch::randn({3, 8, 5, 5}), {}};
    const FeatureBundle bundle{f.spatial, f.spatial.mean({2, 3})};
    const auto logits = torch::cat(heads->forward(bundle.pooled).logits, 1);
    const auto stack = cam_stack(bundle, *heads);
    const auto lhs = stack.raw.mean({2, 3});
    const auto rhs = logits - heads->bias_vector().unsqueeze(0);
    EXPECT_LT((lhs - rhs).abs().max().item<float>(), 1e-5f);
  }
}

TEST(Cam, StackChannelsMatchComputeCam) {
  torch::manual_seed(4);
  const auto schema = AttributeSchema::parse("a: x, y, z\nb: p, q\n");
  GroupHeads heads(schema, 4, true);
  const auto spatial = torch::randn({2, 4, 3, 3});
  const auto stack = cam_stack({spatial, spatial.mean({2, 3})}, *heads);
  EXPECT_EQ(stack.raw.size(1), 5);
  const auto w = heads->weight_matrix();
  for (int b = 0; b < 2; ++b)
    for (int k = 0; k < 5; ++k) EXPECT_TRUE(torch::allclose(stack.raw[b][k], compute_cam(spatial[b], w[k]), 1e-5, 1e-5));
  EXPECT_EQ(stack.class_index[4], (std::pair<std::string, std::string>{"b", "q"}));
}

TEST(Cam, NormalizationRange) {
  torch::manual_seed(5);
  auto raw = torch::randn({2, 3, 4, 4});
  raw[1][2].fill_(7.0f);
  const auto maps = normalize_channels(raw);
  for (int b = 0; b < 2; ++b)
    for (int k = 0; k < 3; ++k) {
      if (b == 1 && k == 2) {
        EXPECT_TRUE(torch::equal(maps[b][k], torch::zeros({4, 4})));
        continue;
      }
      EXPECT_NEAR(maps[b][k].max().item<float>(), 1.0f, 1e-6);
      EXPECT_NEAR(maps[b][k].min().item<float>(), 0.0f, 1e-6);
    }
}

TEST(Cam, Linearity) {
  torch::manual_seed(6);
  const auto f1 = torch::randn({4, 3, 3}), f2 = torch::randn({4, 3, 3});
  const auto w1 = torch::randn({4}), w2 = torch::randn({4});
  EXPECT_TRUE(torch::allclose(compute_cam(2.0 * f1 - 0.5 * f2, w1),
                              2.0 * compute_cam(f1, w1) - 0.5 * compute_cam(f2, w1), 1e-5, 1e-5));
  EXPECT_TRUE(torch::allclose(compute_cam(f1, w1 + 3.0 * w2), compute_cam(f1, w1) + 3.0 * compute_cam(f1, w2), 1e-5,
                              1e-5));
}

TEST(Cam, GradientsReachFeaturesAndWeights) {
  torch::manual_seed(7);
  GroupHeads heads(test::toy_schema(), 4, true);
  const auto spatial = torch::randn({2, 4, 3, 3}).set_requires_grad(true);
  const auto stack = cam_stack({spatial, spatial.mean({2, 3})}, *heads);
  stack.maps.pow(2).sum().backward();
  EXPECT_GT(spatial.grad().abs().sum().item<float>(), 0.0f);
  EXPECT_GT(heads->head(0)->weight.grad().abs().sum().item<float>(), 0.0f);
}

TEST(Overlay, ZeroAndOneMaps) {
  Image src(1, 6, 6, 0.4f);
  const auto zero = render_cam(torch::zeros({3, 3}), src);
  const auto c0 = jet_color(0.0f);
  const auto one = render_cam(torch::ones({3, 3}), src);
  const auto c1 = jet_color(1.0f);
  ASSERT_EQ(zero.channels, 3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) {
        EXPECT_NEAR(zero.at(c, y, x), 0.2f + 0.5f * c0[c], 1e-6);
        EXPECT_NEAR(one.at(c, y, x), 0.2f + 0.5f * c1[c], 1e-6);
      }
  EXPECT_NE(c0, c1);
  EXPECT_THROW(render_cam(torch::zeros({1, 3, 3}), src), ShapeError);
}

TEST(Overlay, FileName) { EXPECT_EQ(cam_file_name("s_1", "size", "large"), "s_1_size_large.png"); }
