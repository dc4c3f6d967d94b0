#include <doctest.h>

#include <cmath>

#include "ani/quant.hpp"
#include "ani/train.hpp"

using namespace ani;

namespace {

RgbImage constant_image(int h, int w, float v) {
  RgbImage img(h, w, v);
  return img;
}

// Smooth two-blob test scene; enough structure to be non-trivial.
RgbImage synthetic_image(int h, int w, std::uint64_t seed = 0) {
  RgbImage img(h, w);
  Rng rng(seed);
  const float cx = static_cast<float>(rng.uniform(0.3, 0.7));
  const float cy = static_cast<float>(rng.uniform(0.3, 0.7));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float u = static_cast<float>(x) / w;
      const float v = static_cast<float>(y) / h;
      const float d = (u - cx) * (u - cx) + (v - cy) * (v - cy);
      img.at(y, x, 0) = 0.5f + 0.4f * std::sin(6.0f * u) * std::cos(4.0f * v);
      img.at(y, x, 1) = std::exp(-8.0f * d);
      img.at(y, x, 2) = 0.3f + 0.5f * u * v;
    }
  }
  return img;
}

double mse_to_psnr(double mse) { return 10.0 * std::log10(1.0 / mse); }

}  // namespace

TEST_CASE("constant gray image fits above 40 dB with a tiny SIREN") {
  ModelConfig cfg;
  cfg.hidden_layers = 1;
  cfg.hidden_width = 16;
  Network net = build_network(cfg);
  TrainConfig tc;
  tc.iterations = 500;
  FitResult r = fit(net, constant_image(16, 16, 0.5f), tc);
  CHECK(mse_to_psnr(r.final_loss) >= 40.0);
}

TEST_CASE("lr = 0 leaves parameters untouched and the loss curve flat") {
  ModelConfig cfg;
  cfg.hidden_layers = 2;
  cfg.hidden_width = 8;
  Network net = build_network(cfg);
  Network before = net;
  TrainConfig tc;
  tc.iterations = 50;
  tc.learning_rate = 0.0f;
  tc.log_every = 1;
  FitResult r = fit(net, synthetic_image(8, 8), tc);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    CHECK((net.layers[i].w.array() == before.layers[i].w.array()).all());
    CHECK((net.layers[i].b.array() == before.layers[i].b.array()).all());
  }
  for (float l : r.loss) CHECK(l == r.loss.front());
}

TEST_CASE("a 2-pixel image is memorized to MSE < 1e-4") {
  ModelConfig cfg;
  cfg.hidden_layers = 1;
  cfg.hidden_width = 4;
  Network net = build_network(cfg);
  RgbImage img(1, 2);
  img.at(0, 0, 0) = 0.9f;
  img.at(0, 0, 1) = 0.1f;
  img.at(0, 0, 2) = 0.5f;
  img.at(0, 1, 0) = 0.2f;
  img.at(0, 1, 1) = 0.8f;
  img.at(0, 1, 2) = 0.4f;
  TrainConfig tc;
  tc.iterations = 1000;
  FitResult r = fit(net, img, tc);
  CHECK(r.final_loss < 1e-4f);
}

TEST_CASE("all backbones fit a small image and improve over init") {
  for (Backbone b : {Backbone::siren, Backbone::mfn, Backbone::fourier}) {
    CAPTURE(to_string(b));
    ModelConfig cfg;
    cfg.backbone = b;
    cfg.hidden_layers = 2;
    cfg.hidden_width = 24;
    cfg.seed = 3;
    Network net = build_network(cfg);
    RgbImage img = synthetic_image(24, 24, 5);
    TrainConfig tc;
    tc.iterations = 400;
    tc.log_every = 400;
    FitResult r = fit(net, img, tc);
    TrainSession probe(net, img, tc, nullptr);
    CHECK(r.final_loss < 0.01f);
    CHECK(std::isfinite(probe.deployed_mse(2, 24)));
  }
}

TEST_CASE("bits = 32 sentinel trains bit-identically to the plain fit") {
  ModelConfig cfg;
  cfg.hidden_layers = 2;
  cfg.hidden_width = 12;
  cfg.seed = 11;
  RgbImage img = synthetic_image(12, 12, 7);
  TrainConfig tc;
  tc.iterations = 120;

  Network plain = build_network(cfg);
  fit(plain, img, tc);

  QuantSpec off;
  off.bits = 32;
  QuantizedNetwork qn = qat_fit(cfg, img, tc, off);
  CHECK(!qn.any_quantized());
  Network trained = qn.dequantize();
  REQUIRE(trained.layers.size() == plain.layers.size());
  for (std::size_t i = 0; i < plain.layers.size(); ++i) {
    CHECK((trained.layers[i].w.array() == plain.layers[i].w.array()).all());
    CHECK((trained.layers[i].b.array() == plain.layers[i].b.array()).all());
  }
}

TEST_CASE("qat_fit emits codes that reconstruct the deployed weights exactly") {
  ModelConfig cfg;
  cfg.hidden_layers = 2;
  cfg.hidden_width = 16;
  cfg.seed = 2;
  RgbImage img = synthetic_image(16, 16, 9);
  TrainConfig tc;
  tc.iterations = 150;

  Network net = build_network(cfg);
  QuantSpec qs;
  qs.bits = 4;
  fit(net, img, tc, &qs);
  QuantizedNetwork qn = quantize_network(net, qs);
  Network deq = qn.dequantize();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (!qn.layers[i].quantized) {
      CHECK((deq.layers[i].w.array() == net.layers[i].w.array()).all());
      continue;
    }
    Matrix expect = fake_quant_signed(net.layers[i].w, qs.weight_steps[i], 4);
    CHECK((deq.layers[i].w.array() == expect.array()).all());
    CHECK(qn.layers[i].codes.maxCoeff() <= 15);
  }

  // Policy default: first and last stay full precision.
  CHECK(!qn.layers.front().quantized);
  CHECK(!qn.layers.back().quantized);
  CHECK(qn.any_quantized());
}

TEST_CASE("ptq fixed point: weights already on the 4-bit grid survive") {
  ModelConfig cfg;
  cfg.hidden_layers = 1;
  cfg.hidden_width = 8;
  Network net = build_network(cfg);
  // Place every hidden weight exactly on the s = max|w| grid.
  Layer& hidden = net.layers[1];
  REQUIRE(hidden.kind == LayerKind::hidden);
  for (Index i = 0; i < hidden.w.size(); ++i) {
    const int level = static_cast<int>(i % 16);
    hidden.w.data()[i] = (static_cast<float>(level) / 8.0f - 1.0f) * 0.5f;
  }
  QuantizedNetwork qn = ptq(net, 4);
  Network deq = qn.dequantize();
  CHECK((deq.layers[1].w.array() == net.layers[1].w.array()).all());

  // Constant tensor: one code everywhere, reconstruction at the nearest level.
  hidden.w.setConstant(0.2f);
  QuantizedNetwork qc = ptq(net, 4);
  const auto& codes = qc.layers[1].codes;
  for (Index i = 0; i < codes.size(); ++i)
    CHECK(codes.data()[i] == codes.data()[0]);
}

TEST_CASE("subsampled batches train deterministically") {
  ModelConfig cfg;
  cfg.hidden_layers = 2;
  cfg.hidden_width = 16;
  cfg.seed = 21;
  RgbImage img = synthetic_image(32, 32, 4);
  TrainConfig tc;
  tc.iterations = 100;
  tc.batch = 64;
  Network a = build_network(cfg);
  Network b = build_network(cfg);
  fit(a, img, tc);
  fit(b, img, tc);
  for (std::size_t i = 0; i < a.layers.size(); ++i)
    CHECK((a.layers[i].w.array() == b.layers[i].w.array()).all());
}

TEST_CASE("divergence is reported with the iteration index") {
  ModelConfig cfg;
  cfg.hidden_layers = 1;
  cfg.hidden_width = 8;
  Network net = build_network(cfg);
  net.layers[0].w.setConstant(1e30f);
  net.layers[1].w.setConstant(1e30f);
  TrainConfig tc;
  tc.iterations = 10;
  tc.learning_rate = 1e10f;
  CHECK_THROWS_AS(fit(net, synthetic_image(8, 8), tc), TrainingError);
}
