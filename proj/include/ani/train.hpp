#pragma once

#include <optional>
#include <vector>

#include "ani/adam.hpp"
#include "ani/image.hpp"
#include "ani/model.hpp"
#include "ani/quant.hpp"

namespace ani {

struct TrainConfig {
  int iterations = 2000;
  std::optional<float> learning_rate;  // unset -> backbone default
  int batch = 0;  // coordinate subsample per step; 0 -> full grid
  int log_every = 100;

  void validate() const;
};

float default_learning_rate(Backbone b);

struct FitResult {
  std::vector<float> loss;  // batch MSE at every log point plus the last step
  float final_loss = 0.0f;
};

/// One fitting engine for plain training, QAT and once-for-all schedules.
/// Owns the optimizer state at full layer shapes so that interleaved subnet
/// phases share moments with the supernet weights they alias.
class TrainSession {
 public:
  /// `qs` may be null (or bits == 32) for full-precision training; otherwise
  /// weight steps are initialized from the current weights and learned.
  TrainSession(Network& net, const RgbImage& image, const TrainConfig& tc,
               QuantSpec* qs);

  /// Runs `iters` steps on the depth x width top-left slice of the network.
  std::vector<float> run(int depth, int width, int iters);

  /// Full-grid MSE of the current slice the way a decoder would see it:
  /// fake-quantized weights, plain activations.
  float deployed_mse(int depth, int width) const;

  Matrix deployed_forward(int depth, int width) const;

 private:
  struct LayerOpt {
    AdamState w;
    Vector bm, bv;
    long bstep = 0;
  };

  void step(int depth, int width, const std::vector<int>& kept,
            std::vector<LayerView>& views, float lr, float* loss_out);

  Network& net_;
  const RgbImage& image_;
  TrainConfig tc_;
  QuantSpec* qs_;
  Matrix coords_, targets_;  // full grid
  std::vector<LayerOpt> opt_;
  std::vector<ScalarAdam> wstep_opt_, astep_opt_;
  Rng sample_rng_;
  long total_steps_ = 0;
};

/// Trains (the full view of) `net` in place and reports the loss curve.
FitResult fit(Network& net, const RgbImage& image, const TrainConfig& tc,
              QuantSpec* qs = nullptr);

/// Layer indices of the full network that a depth-reduced subnet keeps.
std::vector<int> kept_layer_indices(const ModelConfig& cfg, int depth);

}  // namespace ani
