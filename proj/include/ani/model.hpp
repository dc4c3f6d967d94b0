#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ani/common.hpp"

namespace ani {

enum class Backbone : std::uint8_t { siren = 0, mfn = 1, fourier = 2 };

Backbone backbone_from_string(const std::string& name);
std::string to_string(Backbone b);

enum class LayerKind : std::uint8_t { first = 0, hidden = 1, last = 2, filter = 3 };

struct ModelConfig {
  Backbone backbone = Backbone::siren;
  int hidden_layers = 4;  // intermediate width x width stages
  int hidden_width = 128;
  float omega0 = 30.0f;          // SIREN frequency factor
  int fourier_features = 64;     // FourierNet: encoding emits sin+cos pairs
  float fourier_sigma = 10.0f;   // FourierNet: frequency scale of the encoding
  float mfn_omega_max = 256.0f;  // MFN: filter frequency band before 1/sqrt(D)
  int in_dim = 2;
  int out_dim = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Layer {
  Matrix w;  // in x out
  Vector b;
  LayerKind kind = LayerKind::hidden;
  bool trainable = true;
  // Learned clip of this layer's output activation; 0 = activations stay
  // in full precision. Meaningful only when the network's act_bits < 32.
  float act_step = 0.0f;
};

/// Aliasing views used for subnet training; mutations land in the owner.
struct LayerView {
  MatrixRef w;
  VectorRef b;
  LayerKind kind;
  bool trainable;
  float act_step = 0.0f;
};

struct LayerConstView {
  ConstMatrixRef w;
  ConstVectorRef b;
  LayerKind kind;
  bool trainable;
  float act_step = 0.0f;
};

struct Network {
  ModelConfig config;
  std::vector<Layer> layers;
  int act_bits = 32;  // < 32: forward quantizes activations per act_step

  std::size_t param_count() const;  // brute force over stored tensors
};

/// Static shape plan for a (possibly reduced) configuration. `stage` is the
/// multiplicative/hidden stage a layer belongs to; stage 1 material plus the
/// head is present in every subnet.
struct LayerShape {
  Index in = 0;
  Index out = 0;
  LayerKind kind = LayerKind::hidden;
  bool trainable = true;
  int stage = 1;
};

std::vector<LayerShape> layer_shapes(const ModelConfig& cfg);
std::vector<LayerShape> layer_shapes(const ModelConfig& cfg, int depth,
                                     int width);

/// Closed-form parameter counts (weights + biases of trainable layers plus
/// frozen encodings — everything a bitstream has to carry).
std::size_t param_count(const ModelConfig& cfg);
std::size_t param_count(const ModelConfig& cfg, int depth, int width);

/// Deterministic initialization from cfg.seed.
Network build_network(const ModelConfig& cfg);

struct CoordGrid {
  int height = 0;
  int width = 0;
  Matrix coords;  // (H*W) x 2, row-major pixel order, each axis in [-1, 1]
};

CoordGrid coordinate_grid(int height, int width);

/// Top-left slices of `net` at the given depth/width. The full network is
/// layer_views(net, cfg.hidden_layers, cfg.hidden_width).
std::vector<LayerView> layer_views(Network& net, int depth, int width);
std::vector<LayerConstView> layer_const_views(const Network& net, int depth,
                                              int width);

/// Forward evaluation over explicit layer views (depth/width already
/// applied). act_bits < 32 applies each view's activation quantizer.
Matrix forward_layers(const ModelConfig& cfg,
                      std::span<const LayerConstView> layers,
                      const Matrix& coords, int act_bits = 32);

/// (H*W) x 3 prediction; throws TrainingError if the output diverges.
Matrix forward(const Network& net, const CoordGrid& grid);

ModelConfig reduced_config(const ModelConfig& cfg, int depth, int width);

}  // namespace ani
