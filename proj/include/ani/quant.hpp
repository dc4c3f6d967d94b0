#pragma once

#include <vector>

#include "ani/model.hpp"
#include "ani/quantizer.hpp"

namespace ani {

struct RgbImage;
struct TrainConfig;
struct FitResult;

enum class LayerPolicy : std::uint8_t { full_precision = 0, quantized = 1 };

/// Hidden linear layers are quantized; first and last layers stay at full
/// precision, and filter banks are treated like first layers.
std::vector<LayerPolicy> default_policy(const ModelConfig& cfg);

struct QuantSpec {
  int bits = 4;  // 32 disables quantization entirely
  bool quantize_activations = true;
  std::vector<LayerPolicy> layer_policy;  // empty -> default_policy
  std::vector<float> weight_steps;        // learned; aligned with full layer list
  std::vector<float> act_steps;

  bool enabled() const { return bits != 32; }
  void validate(const ModelConfig& cfg) const;
  LayerPolicy policy_for(const ModelConfig& cfg, std::size_t layer) const;
};

struct QuantizedLayer {
  LayerKind kind = LayerKind::hidden;
  bool trainable = true;
  bool quantized = false;
  int bits = 32;
  float step = 0.0f;
  MatX<std::uint8_t> codes;  // quantized layers
  Matrix w;                  // full-precision layers
  Vector b;                  // biases always fp32
};

struct QuantizedNetwork {
  ModelConfig config;
  std::vector<QuantizedLayer> layers;

  Network dequantize() const;
  bool any_quantized() const;
  int quantized_bits() const;  // 32 when nothing is quantized
};

/// Snapshot of `net` under the spec's steps/policy: codes for quantized
/// layers, raw tensors elsewhere. The steps must already be initialized.
QuantizedNetwork quantize_network(const Network& net, const QuantSpec& qs);

/// Full-precision wrap (no quantized layers).
QuantizedNetwork quantize_network(const Network& net);

/// Post-training quantization: per-tensor step from max|w|, no retraining.
QuantizedNetwork ptq(const Network& net, int bits,
                     std::vector<LayerPolicy> policy = {});

/// Quantization-aware training from scratch (fake-quant forward from the
/// first iteration, LSQ steps learned by backprop).
QuantizedNetwork qat_fit(const ModelConfig& cfg, const RgbImage& image,
                         const TrainConfig& tc, QuantSpec qs,
                         FitResult* result = nullptr);

/// Histogram over the code alphabet, for entropy-coder testing.
std::vector<std::size_t> code_histogram(const QuantizedNetwork& qn);

}  // namespace ani
