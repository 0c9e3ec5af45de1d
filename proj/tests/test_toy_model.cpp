#include <gtest/gtest.h>

#include <cmath>

#include "mondepth/errors.hpp"
#include "mondepth/rng.hpp"
#include "mondepth/toy_model.hpp"

using namespace mondepth;

namespace {

ImageGrid random_input(int w, int h, int ch, uint64_t seed) {
  Rng rng(seed);
  ImageGrid img(w, h, ch);
  for (ScalarGrid& g : img.channels)
    for (double& v : g.data) v = rng.next_range(-1.0, 1.0);
  return img;
}

double weighted_output_sum(const ToyNet& net, const ImageGrid& input, const ScalarGrid& upstream) {
  ScalarGrid out = toy_forward(net, input);
  double s = 0.0;
  for (size_t i = 0; i < out.size(); ++i) s += upstream.data[i] * out.data[i];
  return s;
}

// Central finite differences over every parameter of the net.
double max_param_grad_rel_error(ToyNet net, const ImageGrid& input, const ScalarGrid& upstream,
                                int stride = 1) {
  ForwardCache cache;
  toy_forward(net, input, &cache);
  NetGrads grads = toy_backward(net, cache, upstream);
  const double eps = 1e-6;
  double worst = 0.0;
  auto probe = [&](std::vector<double>& params, const std::vector<double>& g) {
    for (size_t i = 0; i < params.size(); i += size_t(stride)) {
      double orig = params[i];
      params[i] = orig + eps;
      double vp = weighted_output_sum(net, input, upstream);
      params[i] = orig - eps;
      double vm = weighted_output_sum(net, input, upstream);
      params[i] = orig;
      double fd = (vp - vm) / (2.0 * eps);
      double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-10});
      worst = std::max(worst, std::abs(fd - g[i]) / denom);
    }
  };
  for (size_t k = 0; k < net.layers.size(); ++k) {
    probe(net.layers[k].w, grads.w[k]);
    probe(net.layers[k].b, grads.b[k]);
  }
  return worst;
}

}  // namespace

TEST(ToyNet, ZeroWeightsYieldHalf) {
  ToyNet net = make_toy_net(3, {8, 1}, 5);
  for (ConvLayer& l : net.layers) {
    for (double& v : l.w) v = 0.0;
    for (double& v : l.b) v = 0.0;
  }
  ScalarGrid out = toy_forward(net, random_input(8, 8, 3, 1));
  for (double v : out.data) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(ToyNet, OutputStaysInOpenUnitInterval) {
  ToyNet net = make_toy_net(3, {16, 16, 1}, 9);
  ScalarGrid out = toy_forward(net, random_input(16, 16, 3, 2));
  for (double v : out.data) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_TRUE(net.all_finite());
  EXPECT_EQ(net.input_channels(), 3);
  EXPECT_EQ(net.parameter_count(), size_t(16 * 3 * 9 + 16 + 16 * 16 * 9 + 16 + 16 * 9 + 1));
}

TEST(ToyNet, RejectsBadConstruction) {
  EXPECT_THROW(make_toy_net(0, {1}), invalid_input);
  EXPECT_THROW(make_toy_net(3, {16, 2}), invalid_input);
  EXPECT_THROW(make_toy_net(3, {}), invalid_input);
  ToyNet net = make_toy_net(3, {4, 1});
  EXPECT_THROW(toy_forward(net, random_input(8, 8, 5, 3)), invalid_input);
}

TEST(ToyBackward, SingleLayerMatchesFiniteDifferences) {
  ToyNet net = make_toy_net(2, {1}, 11);
  ImageGrid input = random_input(8, 8, 2, 4);
  Rng rng(12);
  ScalarGrid upstream(8, 8);
  for (double& v : upstream.data) v = rng.next_range(-1.0, 1.0);
  EXPECT_LT(max_param_grad_rel_error(net, input, upstream), 1e-4);
}

TEST(ToyBackward, DeepNetMatchesFiniteDifferences) {
  ToyNet net = make_toy_net(3, {6, 4, 1}, 13);
  ImageGrid input = random_input(10, 10, 3, 5);
  Rng rng(14);
  ScalarGrid upstream(10, 10);
  for (double& v : upstream.data) v = rng.next_range(-1.0, 1.0);
  EXPECT_LT(max_param_grad_rel_error(net, input, upstream, 5), 1e-4);
}

TEST(ToyBackward, LinearInUpstream) {
  ToyNet net = make_toy_net(3, {4, 1}, 15);
  ImageGrid input = random_input(8, 8, 3, 6);
  ForwardCache cache;
  toy_forward(net, input, &cache);
  Rng rng(16);
  ScalarGrid u1(8, 8), u2(8, 8), mix(8, 8);
  for (size_t i = 0; i < u1.size(); ++i) {
    u1.data[i] = rng.next_range(-1.0, 1.0);
    u2.data[i] = rng.next_range(-1.0, 1.0);
    mix.data[i] = 2.0 * u1.data[i] - 0.5 * u2.data[i];
  }
  NetGrads g1 = toy_backward(net, cache, u1);
  NetGrads g2 = toy_backward(net, cache, u2);
  NetGrads gm = toy_backward(net, cache, mix);
  for (size_t k = 0; k < net.layers.size(); ++k) {
    for (size_t i = 0; i < gm.w[k].size(); ++i)
      EXPECT_NEAR(gm.w[k][i], 2.0 * g1.w[k][i] - 0.5 * g2.w[k][i], 1e-12);
    for (size_t i = 0; i < gm.b[k].size(); ++i)
      EXPECT_NEAR(gm.b[k][i], 2.0 * g1.b[k][i] - 0.5 * g2.b[k][i], 1e-12);
  }
}

TEST(ToyBackward, ZeroUpstreamGivesZeroGrads) {
  ToyNet net = make_toy_net(3, {4, 1}, 17);
  ImageGrid input = random_input(8, 8, 3, 7);
  ForwardCache cache;
  toy_forward(net, input, &cache);
  NetGrads g = toy_backward(net, cache, ScalarGrid(8, 8, 0.0));
  for (size_t k = 0; k < net.layers.size(); ++k) {
    for (double v : g.w[k]) EXPECT_DOUBLE_EQ(v, 0.0);
    for (double v : g.b[k]) EXPECT_DOUBLE_EQ(v, 0.0);
  }
}

TEST(ToyBackward, RequiresFreshCache) {
  ToyNet net = make_toy_net(3, {4, 1}, 18);
  ForwardCache cache;
  EXPECT_THROW(toy_backward(net, cache, ScalarGrid(8, 8)), invalid_input);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ToyNet net = make_toy_net(1, {1}, 19);
  std::vector<double> before = net.layers[0].w;
  OptimizerState opt = make_optimizer(net, 1e-2);
  adam_step(opt, net, zero_grads(net));
  adam_step(opt, net, zero_grads(net));
  EXPECT_EQ(net.layers[0].w, before);
  EXPECT_EQ(opt.step, 2);
}

TEST(Adam, ConstantGradientStepsApproachLearningRate) {
  ToyNet net = make_toy_net(1, {1}, 20);
  OptimizerState opt = make_optimizer(net, 1e-3);
  NetGrads g = zero_grads(net);
  for (double& v : g.w[0]) v = 1.0;
  for (double& v : g.b[0]) v = -2.0;
  std::vector<double> prev = net.layers[0].w;
  double prev_b = net.layers[0].b[0];
  for (int step = 0; step < 10; ++step) {
    adam_step(opt, net, g);
    for (size_t i = 0; i < prev.size(); ++i) {
      double delta = prev[i] - net.layers[0].w[i];
      EXPECT_NEAR(delta, 1e-3, 1e-9);
    }
    EXPECT_NEAR(net.layers[0].b[0] - prev_b, 1e-3, 1e-9);
    prev = net.layers[0].w;
    prev_b = net.layers[0].b[0];
  }
}

TEST(Adam, SingleStepHandOracle) {
  ToyNet net = make_toy_net(1, {1}, 21);
  net.layers[0].w.assign(9, 0.3);
  OptimizerState opt = make_optimizer(net, 0.1);
  NetGrads g = zero_grads(net);
  for (double& v : g.w[0]) v = 0.5;
  adam_step(opt, net, g);
  // m-hat = g, v-hat = g^2 after bias correction at step 1.
  double expect = 0.3 - 0.1 * 0.5 / (std::sqrt(0.25) + 1e-8);
  for (double v : net.layers[0].w) EXPECT_NEAR(v, expect, 1e-15);
}

TEST(Adam, NonFiniteGradientAborts) {
  ToyNet net = make_toy_net(3, {4, 1}, 22);
  NetGrads g = zero_grads(net);
  g.w[1][3] = std::numeric_limits<double>::quiet_NaN();
  OptimizerState opt = make_optimizer(net);
  try {
    adam_step(opt, net, g);
    FAIL() << "expected training_aborted";
  } catch (const training_aborted& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos);
  }
  EXPECT_TRUE(net.all_finite());
}

TEST(NormalizeDisparity, MapsRangeAndConstants) {
  ScalarGrid d(4, 1);
  d.data = {1.0, 2.0, 3.0, 5.0};
  ScalarGrid out = normalize_disparity(d, ValidMask(4, 1));
  EXPECT_DOUBLE_EQ(out.data[0], 0.02);
  EXPECT_DOUBLE_EQ(out.data[3], 0.98);
  EXPECT_GT(out.data[1], 0.02);
  EXPECT_LT(out.data[2], 0.98);
  ScalarGrid c(4, 1, 2.5);
  out = normalize_disparity(c, ValidMask(4, 1));
  for (double v : out.data) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Samples, SsiSampleShape) {
  RenderedScene scene = render_scene(SceneSpec{.seed = 30, .width = 32, .height = 32});
  TrainSample s = make_ssi_sample(scene);
  EXPECT_EQ(s.input.channel_count(), 3);
  EXPECT_FALSE(s.depth_space);
  for (size_t i = 0; i < s.target.size(); ++i) {
    if (!s.mask.flags[i]) continue;
    EXPECT_GE(s.target.data[i], 0.02);
    EXPECT_LE(s.target.data[i], 0.98);
  }
}

TEST(Samples, SiSampleScaleFixConsistency) {
  RenderedScene scene = render_scene(SceneSpec{.seed = 31, .width = 32, .height = 32});
  TrainSample s = make_si_sample(scene, 77);
  EXPECT_EQ(s.input.channel_count(), 5);
  EXPECT_TRUE(s.depth_space);
  // target = c / depth and gt_depth = depth / c must stay reciprocal.
  for (size_t i = 0; i < s.target.size(); ++i) {
    if (!s.mask.flags[i]) continue;
    EXPECT_NEAR(s.target.data[i] * s.gt_depth.data[i], 1.0, 1e-9);
  }
  TrainSample rgb = make_si_sample(scene, 77, /*rgb_only=*/true);
  EXPECT_EQ(rgb.input.channel_count(), 3);
  for (size_t i = 0; i < rgb.target.size(); ++i)
    EXPECT_DOUBLE_EQ(rgb.target.data[i], s.target.data[i]);
}

TEST(Samples, SiSampleJitterIsSeeded) {
  RenderedScene scene = render_scene(SceneSpec{.seed = 32, .width = 32, .height = 32});
  TrainSample a = make_si_sample(scene, 1);
  TrainSample b = make_si_sample(scene, 1);
  TrainSample c = make_si_sample(scene, 2);
  EXPECT_EQ(a.input.channels[3].data, b.input.channels[3].data);
  EXPECT_NE(a.input.channels[3].data, c.input.channels[3].data);
}

TEST(SplitDataset, TrailingFraction) {
  RenderedScene scene = render_scene(SceneSpec{.seed = 33, .width = 16, .height = 16});
  std::vector<TrainSample> all(8, make_ssi_sample(scene));
  std::vector<TrainSample> tr, ho;
  split_dataset(all, 0.25, tr, ho);
  EXPECT_EQ(tr.size(), 6u);
  EXPECT_EQ(ho.size(), 2u);
  std::vector<TrainSample> one(1, make_ssi_sample(scene));
  split_dataset(one, 0.25, tr, ho);
  EXPECT_EQ(tr.size(), 1u);
  EXPECT_EQ(ho.size(), 1u);
}

TEST(Train, LossDecreasesOnSingleScene) {
  std::vector<RenderedScene> scenes = make_benchmark_scenes(1, 7);
  std::vector<TrainSample> ds = {make_ssi_sample(scenes[0])};
  TrainConfig cfg;
  cfg.epochs = 5;
  ToyNet net = make_toy_net(3, {16, 16, 16, 1}, cfg.seed);
  TrainResult res = train(net, ds, cfg);
  ASSERT_FALSE(res.diverged);
  ASSERT_EQ(res.log.size(), 5u);
  for (size_t e = 1; e < res.log.size(); ++e)
    EXPECT_LT(res.log[e].train_loss, res.log[e - 1].train_loss);
}

TEST(Train, ZeroLearningRateIsInert) {
  std::vector<RenderedScene> scenes = make_benchmark_scenes(2, 3, 32);
  std::vector<TrainSample> ds;
  for (const RenderedScene& s : scenes) ds.push_back(make_ssi_sample(s));
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.lr = 0.0;
  ToyNet net = make_toy_net(3, {8, 1}, 1);
  std::vector<double> before = net.layers[0].w;
  TrainResult res = train(net, ds, cfg);
  EXPECT_EQ(res.net.layers[0].w, before);
  ASSERT_EQ(res.log.size(), 2u);
  EXPECT_DOUBLE_EQ(res.log[0].train_loss, res.log[1].train_loss);
}

TEST(Train, BitwiseDeterministic) {
  std::vector<RenderedScene> scenes = make_benchmark_scenes(4, 5, 32);
  std::vector<TrainSample> ds;
  for (const RenderedScene& s : scenes) ds.push_back(make_ssi_sample(s));
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.recipe = Recipe::SsiSo;
  auto run = [&]() { return train(make_toy_net(3, {8, 8, 1}, cfg.seed), ds, cfg); };
  TrainResult a = run();
  TrainResult b = run();
  for (size_t k = 0; k < a.net.layers.size(); ++k) {
    EXPECT_EQ(a.net.layers[k].w, b.net.layers[k].w);
    EXPECT_EQ(a.net.layers[k].b, b.net.layers[k].b);
  }
  ASSERT_EQ(a.log.size(), b.log.size());
  for (size_t e = 0; e < a.log.size(); ++e) {
    EXPECT_DOUBLE_EQ(a.log[e].train_loss, b.log[e].train_loss);
    EXPECT_DOUBLE_EQ(a.log[e].ord, b.log[e].ord);
    EXPECT_DOUBLE_EQ(a.log[e].d3r, b.log[e].d3r);
  }
  EXPECT_EQ(a.correct_pairs, b.correct_pairs);
}

TEST(Train, OrdinalPairsNeverPushCorrectOrderings) {
  std::vector<RenderedScene> scenes = make_benchmark_scenes(2, 9, 32);
  std::vector<TrainSample> ds;
  for (const RenderedScene& s : scenes) ds.push_back(make_ssi_sample(s));
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.ssig_scales = 4;
  cfg.recipe = Recipe::SsiSo;
  TrainResult so = train(make_toy_net(3, {8, 1}, 2), ds, cfg);
  ASSERT_GT(so.correct_pairs, 0);
  EXPECT_EQ(so.correct_pairs_nonzero_grad, 0);
  EXPECT_DOUBLE_EQ(so.max_correct_pair_grad, 0.0);
  cfg.recipe = Recipe::SsiRanking;
  TrainResult rank = train(make_toy_net(3, {8, 1}, 2), ds, cfg);
  ASSERT_GT(rank.correct_pairs, 0);
  EXPECT_EQ(rank.correct_pairs_nonzero_grad, rank.correct_pairs);
  EXPECT_GT(rank.max_correct_pair_grad, 0.0);
}

TEST(Train, ValidatesInputs) {
  TrainConfig cfg;
  EXPECT_THROW(train(make_toy_net(3, {4, 1}), {}, cfg), insufficient_data);
  RenderedScene scene = render_scene(SceneSpec{.seed = 40, .width = 32, .height = 32});
  std::vector<TrainSample> ds = {make_ssi_sample(scene)};
  EXPECT_THROW(train(make_toy_net(5, {4, 1}), ds, cfg), invalid_input);
}

TEST(BenchmarkScenes, FixedAndDistinct) {
  std::vector<RenderedScene> a = make_benchmark_scenes(3, 7, 32);
  std::vector<RenderedScene> b = make_benchmark_scenes(3, 7, 32);
  ASSERT_EQ(a.size(), 3u);
  for (size_t i = 0; i < 3; ++i) EXPECT_EQ(a[i].depth.data, b[i].depth.data);
  EXPECT_NE(a[0].depth.data, a[1].depth.data);
}
