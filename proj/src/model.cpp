#include "ani/model.hpp"

#include <cmath>

#include "ani/activations.hpp"
#include "ani/linear.hpp"

namespace ani {

Backbone backbone_from_string(const std::string& name) {
  if (name == "siren") return Backbone::siren;
  if (name == "mfn") return Backbone::mfn;
  if (name == "fourier") return Backbone::fourier;
  throw ConfigError("unknown backbone '" + name + "'");
}

std::string to_string(Backbone b) {
  switch (b) {
    case Backbone::siren: return "siren";
    case Backbone::mfn: return "mfn";
    case Backbone::fourier: return "fourier";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (hidden_layers < 1) throw ConfigError("hidden_layers must be >= 1");
  if (hidden_width < 1) throw ConfigError("hidden_width must be >= 1");
  if (in_dim != 2 || out_dim != 3)
    throw ConfigError("images need in_dim = 2, out_dim = 3");
  if (backbone == Backbone::siren && !(omega0 > 0))
    throw ConfigError("omega0 must be > 0");
  if (backbone == Backbone::fourier && fourier_features < 1)
    throw ConfigError("fourier_features must be >= 1");
}

std::vector<LayerShape> layer_shapes(const ModelConfig& cfg, int depth,
                                     int width) {
  cfg.validate();
  if (depth < 1 || depth > cfg.hidden_layers || width < 1 ||
      width > cfg.hidden_width) {
    throw ConfigError("subnet " + std::to_string(depth) + "x" +
                      std::to_string(width) + " outside " +
                      std::to_string(cfg.hidden_layers) + "x" +
                      std::to_string(cfg.hidden_width));
  }
  const Index d = depth, w = width, in = cfg.in_dim, out = cfg.out_dim;
  std::vector<LayerShape> shapes;
  switch (cfg.backbone) {
    case Backbone::siren:
      shapes.push_back({in, w, LayerKind::first, true, 1});
      for (int i = 1; i <= d; ++i)
        shapes.push_back({w, w, LayerKind::hidden, true, i});
      break;
    case Backbone::mfn:
      // Stage i: z_i = sin(F_i x + phi_i) .* (W_i z_{i-1} + b_i), z_0 = x.
      for (int i = 1; i <= d; ++i) {
        shapes.push_back({in, w, LayerKind::filter, true, i});
        shapes.push_back({i == 1 ? in : w, w,
                          i == 1 ? LayerKind::first : LayerKind::hidden, true,
                          i});
      }
      break;
    case Backbone::fourier: {
      // Frozen sin/cos feature bank, then a GELU MLP; the 2m -> w layer
      // counts as the first of the `depth` stages.
      const Index enc = 2 * static_cast<Index>(cfg.fourier_features);
      shapes.push_back({in, enc, LayerKind::filter, false, 1});
      shapes.push_back({enc, w, LayerKind::first, true, 1});
      for (int i = 2; i <= d; ++i)
        shapes.push_back({w, w, LayerKind::hidden, true, i});
      break;
    }
  }
  shapes.push_back({w, out, LayerKind::last, true, 1});
  return shapes;
}

std::vector<LayerShape> layer_shapes(const ModelConfig& cfg) {
  return layer_shapes(cfg, cfg.hidden_layers, cfg.hidden_width);
}

std::size_t param_count(const ModelConfig& cfg, int depth, int width) {
  std::size_t n = 0;
  for (const LayerShape& s : layer_shapes(cfg, depth, width))
    n += static_cast<std::size_t>(s.in) * s.out + s.out;
  return n;
}

std::size_t param_count(const ModelConfig& cfg) {
  return param_count(cfg, cfg.hidden_layers, cfg.hidden_width);
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers)
    n += static_cast<std::size_t>(l.w.size()) + l.b.size();
  return n;
}

namespace {

Matrix uniform_matrix(Rng& rng, Index rows, Index cols, double lo, double hi) {
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      m(r, c) = static_cast<float>(rng.uniform(lo, hi));
  return m;
}

Vector uniform_vector(Rng& rng, Index n, double lo, double hi) {
  Vector v(n);
  for (Index i = 0; i < n; ++i)
    v[i] = static_cast<float>(rng.uniform(lo, hi));
  return v;
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

Network build_network(const ModelConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Network net;
  net.config = cfg;
  const auto shapes = layer_shapes(cfg);
  net.layers.reserve(shapes.size());
  const double omega = cfg.omega0;
  const double mfn_band =
      cfg.mfn_omega_max / std::sqrt(static_cast<double>(cfg.hidden_layers));

  for (const LayerShape& s : shapes) {
    Layer l;
    l.kind = s.kind;
    l.trainable = s.trainable;
    const double fan_in = static_cast<double>(s.in);
    switch (cfg.backbone) {
      case Backbone::siren: {
        const double bound = s.kind == LayerKind::first
                                 ? 1.0 / fan_in
                                 : std::sqrt(6.0 / fan_in) / omega;
        l.w = uniform_matrix(rng, s.in, s.out, -bound, bound);
        const double bb = 1.0 / std::sqrt(fan_in);
        l.b = uniform_vector(rng, s.out, -bb, bb);
        break;
      }
      case Backbone::mfn: {
        if (s.kind == LayerKind::filter) {
          l.w = uniform_matrix(rng, s.in, s.out, -mfn_band, mfn_band);
          l.b = uniform_vector(rng, s.out, -kPi, kPi);  // phases
        } else {
          const double bound = 1.0 / std::sqrt(fan_in);
          l.w = uniform_matrix(rng, s.in, s.out, -bound, bound);
          l.b = uniform_vector(rng, s.out, -bound, bound);
        }
        break;
      }
      case Backbone::fourier: {
        if (s.kind == LayerKind::filter) {
          // [sin(Bx) | sin(Bx + pi/2)] = [sin | cos] of the same bank.
          const Index m = s.out / 2;
          Matrix bank(s.in, m);
          for (Index r = 0; r < s.in; ++r)
            for (Index c = 0; c < m; ++c)
              bank(r, c) = static_cast<float>(2.0 * kPi * cfg.fourier_sigma *
                                              rng.normal());
          l.w.resize(s.in, s.out);
          l.w << bank, bank;
          l.b = Vector::Zero(s.out);
          l.b.tail(m).setConstant(static_cast<float>(kPi / 2.0));
        } else {
          const double bound = std::sqrt(6.0 / (fan_in + s.out));
          l.w = uniform_matrix(rng, s.in, s.out, -bound, bound);
          const double bb = 1.0 / std::sqrt(fan_in);
          l.b = uniform_vector(rng, s.out, -bb, bb);
        }
        break;
      }
    }
    net.layers.push_back(std::move(l));
  }
  return net;
}

CoordGrid coordinate_grid(int height, int width) {
  if (height < 1 || width < 1)
    throw DimensionError("coordinate_grid: dimensions must be >= 1");
  CoordGrid g;
  g.height = height;
  g.width = width;
  g.coords.resize(static_cast<Index>(height) * width, 2);
  for (int row = 0; row < height; ++row) {
    const float y =
        height == 1 ? 0.0f : 2.0f * row / static_cast<float>(height - 1) - 1.0f;
    for (int col = 0; col < width; ++col) {
      const float x =
          width == 1 ? 0.0f : 2.0f * col / static_cast<float>(width - 1) - 1.0f;
      const Index i = static_cast<Index>(row) * width + col;
      g.coords(i, 0) = x;
      g.coords(i, 1) = y;
    }
  }
  return g;
}

namespace {

template <class Net, class View>
std::vector<View> make_views(Net& net, int depth, int width) {
  const auto full = layer_shapes(net.config);
  const auto sub = layer_shapes(net.config, depth, width);
  if (full.size() != net.layers.size())
    throw ConfigError("network does not match its own config");
  std::vector<View> views;
  views.reserve(sub.size());
  std::size_t j = 0;
  for (std::size_t i = 0; i < full.size(); ++i) {
    if (full[i].stage > depth) continue;
    const LayerShape& s = sub[j++];
    auto& l = net.layers[i];
    views.push_back(
        {l.w.topLeftCorner(s.in, s.out), l.b.head(s.out), l.kind, l.trainable});
  }
  return views;
}

}  // namespace

std::vector<LayerView> layer_views(Network& net, int depth, int width) {
  return make_views<Network, LayerView>(net, depth, width);
}

std::vector<LayerConstView> layer_const_views(const Network& net, int depth,
                                              int width) {
  return make_views<const Network, LayerConstView>(net, depth, width);
}

Matrix forward_layers(const ModelConfig& cfg,
                      std::span<const LayerConstView> layers,
                      const Matrix& coords) {
  if (coords.cols() != cfg.in_dim)
    throw DimensionError("forward: coords" +
                         shape_str(coords.rows(), coords.cols()) +
                         " vs in_dim " + std::to_string(cfg.in_dim));
  Matrix z;
  switch (cfg.backbone) {
    case Backbone::siren: {
      z = coords;
      for (std::size_t i = 0; i + 1 < layers.size(); ++i)
        z = sine_forward(linear_apply(z, layers[i].w, layers[i].b),
                         cfg.omega0);
      break;
    }
    case Backbone::mfn: {
      z = coords;
      for (std::size_t i = 0; i + 1 < layers.size(); i += 2) {
        const auto& filt = layers[i];
        const auto& lin = layers[i + 1];
        Matrix g = sine_forward(linear_apply(coords, filt.w, filt.b), 1.0f);
        z = g.cwiseProduct(linear_apply(z, lin.w, lin.b));
      }
      break;
    }
    case Backbone::fourier: {
      z = sine_forward(linear_apply(coords, layers[0].w, layers[0].b), 1.0f);
      for (std::size_t i = 1; i + 1 < layers.size(); ++i)
        z = gelu_forward(linear_apply(z, layers[i].w, layers[i].b));
      break;
    }
  }
  const auto& head = layers.back();
  Matrix out = linear_apply(z, head.w, head.b);
  if (!out.allFinite())
    throw TrainingError("forward: model diverged (non-finite output)");
  return out;
}

Matrix forward(const Network& net, const CoordGrid& grid) {
  const auto views =
      layer_const_views(net, net.config.hidden_layers, net.config.hidden_width);
  return forward_layers(net.config, views, grid.coords);
}

ModelConfig reduced_config(const ModelConfig& cfg, int depth, int width) {
  ModelConfig r = cfg;
  r.hidden_layers = depth;
  r.hidden_width = width;
  return r;
}

}  // namespace ani
