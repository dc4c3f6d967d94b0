#include "ani/quant.hpp"

#include "ani/train.hpp"

namespace ani {

std::vector<LayerPolicy> default_policy(const ModelConfig& cfg) {
  std::vector<LayerPolicy> p;
  for (const LayerShape& s : layer_shapes(cfg)) {
    p.push_back(s.kind == LayerKind::hidden ? LayerPolicy::quantized
                                            : LayerPolicy::full_precision);
  }
  return p;
}

void QuantSpec::validate(const ModelConfig& cfg) const {
  if (bits != 2 && bits != 4 && bits != 8 && bits != 32)
    throw ConfigError("bits must be one of 2, 4, 8 (or 32 to disable)");
  const std::size_t n = layer_shapes(cfg).size();
  if (!layer_policy.empty() && layer_policy.size() != n)
    throw ConfigError("layer_policy must cover all " + std::to_string(n) +
                      " layers");
  if (!weight_steps.empty() && weight_steps.size() != n)
    throw ConfigError("weight_steps must cover all layers");
  for (float s : weight_steps)
    if (s < 0.0f) throw ConfigError("weight steps must be positive");
}

LayerPolicy QuantSpec::policy_for(const ModelConfig& cfg,
                                  std::size_t layer) const {
  if (!enabled()) return LayerPolicy::full_precision;
  const auto shapes = layer_shapes(cfg);
  if (layer >= shapes.size()) throw ConfigError("layer index out of range");
  // The frozen feature bank is never quantized (not trainable, unbounded
  // frequency range); explicit policies cover everything else.
  if (!shapes[layer].trainable) return LayerPolicy::full_precision;
  if (!layer_policy.empty()) return layer_policy[layer];
  return shapes[layer].kind == LayerKind::hidden ? LayerPolicy::quantized
                                                 : LayerPolicy::full_precision;
}

bool QuantizedNetwork::any_quantized() const {
  for (const auto& l : layers)
    if (l.quantized) return true;
  return false;
}

int QuantizedNetwork::quantized_bits() const {
  for (const auto& l : layers)
    if (l.quantized) return l.bits;
  return 32;
}

Network QuantizedNetwork::dequantize() const {
  Network net;
  net.config = config;
  net.layers.reserve(layers.size());
  for (const QuantizedLayer& ql : layers) {
    Layer l;
    l.kind = ql.kind;
    l.trainable = ql.trainable;
    l.w = ql.quantized ? dequantize_codes(ql.codes, ql.step, ql.bits) : ql.w;
    l.b = ql.b;
    net.layers.push_back(std::move(l));
  }
  return net;
}

QuantizedNetwork quantize_network(const Network& net, const QuantSpec& qs) {
  qs.validate(net.config);
  QuantizedNetwork qn;
  qn.config = net.config;
  qn.layers.reserve(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& l = net.layers[i];
    QuantizedLayer ql;
    ql.kind = l.kind;
    ql.trainable = l.trainable;
    ql.b = l.b;
    if (qs.enabled() &&
        qs.policy_for(net.config, i) == LayerPolicy::quantized) {
      if (qs.weight_steps.size() <= i || !(qs.weight_steps[i] > 0.0f))
        throw ConfigError("missing learned step for quantized layer " +
                          std::to_string(i));
      ql.quantized = true;
      ql.bits = qs.bits;
      ql.step = qs.weight_steps[i];
      ql.codes = quantize_codes_signed(l.w, ql.step, ql.bits);
    } else {
      ql.w = l.w;
    }
    qn.layers.push_back(std::move(ql));
  }
  return qn;
}

QuantizedNetwork quantize_network(const Network& net) {
  QuantSpec off;
  off.bits = 32;
  return quantize_network(net, off);
}

QuantizedNetwork ptq(const Network& net, int bits,
                     std::vector<LayerPolicy> policy) {
  if (bits == 32) return quantize_network(net);
  QuantSpec qs;
  qs.bits = bits;
  qs.layer_policy = std::move(policy);
  qs.validate(net.config);
  qs.weight_steps.assign(net.layers.size(), 0.0f);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (qs.policy_for(net.config, i) != LayerPolicy::quantized) continue;
    const Layer& l = net.layers[i];
    if (l.w.size() == 0) throw ConfigError("cannot calibrate an empty tensor");
    const float s = l.w.cwiseAbs().maxCoeff();  // max(|w_min|, |w_max|)
    qs.weight_steps[i] = s > 1e-8f ? s : 1e-8f;
  }
  return quantize_network(net, qs);
}

QuantizedNetwork qat_fit(const ModelConfig& cfg, const RgbImage& image,
                         const TrainConfig& tc, QuantSpec qs,
                         FitResult* result) {
  Network net = build_network(cfg);
  FitResult r = fit(net, image, tc, qs.enabled() ? &qs : nullptr);
  if (result) *result = r;
  return qs.enabled() ? quantize_network(net, qs) : quantize_network(net);
}

std::vector<std::size_t> code_histogram(const QuantizedNetwork& qn) {
  std::vector<std::size_t> hist;
  for (const auto& l : qn.layers) {
    if (!l.quantized) continue;
    hist.resize(std::max<std::size_t>(hist.size(), code_count(l.bits)), 0);
    for (Index i = 0; i < l.codes.size(); ++i) ++hist[l.codes.data()[i]];
  }
  return hist;
}

}  // namespace ani
