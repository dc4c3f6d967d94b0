#include "ani/train.hpp"

#include <cmath>
#include <string>

#include "ani/activations.hpp"
#include "ani/linear.hpp"

namespace ani {

void TrainConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (learning_rate && *learning_rate < 0)
    throw ConfigError("learning_rate must be >= 0");
  if (batch < 0) throw ConfigError("batch must be >= 0");
  if (log_every < 1) throw ConfigError("log_every must be >= 1");
}

float default_learning_rate(Backbone b) {
  return b == Backbone::mfn ? 1e-2f : 1e-3f;
}

std::vector<int> kept_layer_indices(const ModelConfig& cfg, int depth) {
  const auto shapes = layer_shapes(cfg);
  std::vector<int> kept;
  for (std::size_t i = 0; i < shapes.size(); ++i)
    if (shapes[i].stage <= depth) kept.push_back(static_cast<int>(i));
  return kept;
}

TrainSession::TrainSession(Network& net, const RgbImage& image,
                           const TrainConfig& tc, QuantSpec* qs)
    : net_(net),
      image_(image),
      tc_(tc),
      qs_(qs && qs->enabled() ? qs : nullptr),
      sample_rng_(net.config.seed ^ 0x9e3779b97f4a7c15ull) {
  tc_.validate();
  net_.config.validate();
  if (image.height < 1 || image.width < 1)
    throw ConfigError("training image is empty");
  const CoordGrid grid = coordinate_grid(image.height, image.width);
  coords_ = grid.coords;
  targets_ = image_to_targets(image);

  opt_.resize(net_.layers.size());
  for (std::size_t i = 0; i < net_.layers.size(); ++i) {
    const Layer& l = net_.layers[i];
    opt_[i].w = AdamState::zeros(l.w.rows(), l.w.cols());
    opt_[i].bm = Vector::Zero(l.b.size());
    opt_[i].bv = Vector::Zero(l.b.size());
  }
  wstep_opt_.resize(net_.layers.size());
  astep_opt_.resize(net_.layers.size());

  if (qs_) {
    qs_->validate(net_.config);
    if (qs_->weight_steps.empty()) qs_->weight_steps.assign(net_.layers.size(), 0.0f);
    if (qs_->act_steps.empty()) qs_->act_steps.assign(net_.layers.size(), 0.0f);
    for (std::size_t i = 0; i < net_.layers.size(); ++i) {
      if (qs_->policy_for(net_.config, i) == LayerPolicy::quantized &&
          qs_->weight_steps[i] == 0.0f) {
        qs_->weight_steps[i] = lsq_clip_init(net_.layers[i].w, qs_->bits);
      }
    }
  }
}

namespace {

float positive(float s) { return s > 1e-8f ? s : 1e-8f; }

}  // namespace

void TrainSession::step(int depth, int width, const std::vector<int>& kept,
                        std::vector<LayerView>& views, float lr,
                        float* loss_out) {
  const Index n_full = coords_.rows();
  const bool subsample = tc_.batch > 0 && tc_.batch < n_full;
  Matrix bx, bt;
  if (subsample) {
    bx.resize(tc_.batch, coords_.cols());
    bt.resize(tc_.batch, targets_.cols());
    for (int i = 0; i < tc_.batch; ++i) {
      const Index r = static_cast<Index>(sample_rng_.below(n_full));
      bx.row(i) = coords_.row(r);
      bt.row(i) = targets_.row(r);
    }
  }
  const Matrix& x = subsample ? bx : coords_;
  const Matrix& t = subsample ? bt : targets_;
  const std::size_t L = views.size();
  const int bits = qs_ ? qs_->bits : 32;

  // Fake-quantized weights where the policy asks for it.
  std::vector<Matrix> wq(L);
  std::vector<char> is_q(L, 0);
  auto weight = [&](std::size_t k) -> ConstMatrixRef {
    return is_q[k] ? ConstMatrixRef(wq[k]) : ConstMatrixRef(views[k].w);
  };
  if (qs_) {
    for (std::size_t k = 0; k < L; ++k) {
      const int full = kept[k];
      if (qs_->policy_for(net_.config, full) == LayerPolicy::quantized) {
        wq[k] = fake_quant_signed(views[k].w, qs_->weight_steps[full], bits);
        is_q[k] = 1;
      }
    }
  }
  const bool actq = qs_ && qs_->quantize_activations;
  auto act_step = [&](int full, const Matrix& raw) -> float {
    // Calibrate the activation clip from the first batch that reaches it.
    if (qs_->act_steps[full] == 0.0f)
      qs_->act_steps[full] = positive(raw.cwiseAbs().maxCoeff());
    return qs_->act_steps[full];
  };

  // Traces for the backward pass.
  std::vector<Matrix> zin(L), preact(L), zraw(L);
  std::vector<Matrix> mfn_pref, mfn_gfilt, mfn_lina;
  Matrix out;
  const Backbone bb = net_.config.backbone;
  const float omega = net_.config.omega0;

  switch (bb) {
    case Backbone::siren: {
      Matrix z = x;
      for (std::size_t k = 0; k < L; ++k) {
        zin[k] = std::move(z);
        Matrix a = linear_apply(zin[k], weight(k), views[k].b);
        if (k + 1 == L) {
          out = std::move(a);
          break;
        }
        preact[k] = std::move(a);
        z = sine_forward(preact[k], omega);
        if (actq) {
          zraw[k] = std::move(z);
          z = fake_quant_signed(zraw[k], act_step(kept[k], zraw[k]), bits);
        }
      }
      break;
    }
    case Backbone::mfn: {
      const std::size_t d = (L - 1) / 2;
      mfn_pref.resize(d);
      mfn_gfilt.resize(d);
      mfn_lina.resize(d);
      Matrix z = x;
      for (std::size_t i = 0; i < d; ++i) {
        const std::size_t fk = 2 * i, lk = 2 * i + 1;
        mfn_pref[i] = linear_apply(x, weight(fk), views[fk].b);
        mfn_gfilt[i] = sine_forward(mfn_pref[i], 1.0f);
        zin[i] = std::move(z);
        mfn_lina[i] = linear_apply(zin[i], weight(lk), views[lk].b);
        Matrix zm = mfn_gfilt[i].cwiseProduct(mfn_lina[i]);
        if (actq) {
          zraw[i] = std::move(zm);
          zm = fake_quant_signed(zraw[i], act_step(kept[lk], zraw[i]), bits);
        }
        z = std::move(zm);
      }
      zin[L - 1] = std::move(z);
      out = linear_apply(zin[L - 1], weight(L - 1), views[L - 1].b);
      break;
    }
    case Backbone::fourier: {
      Matrix z = sine_forward(linear_apply(x, views[0].w, views[0].b), 1.0f);
      for (std::size_t k = 1; k + 1 < L; ++k) {
        zin[k] = std::move(z);
        preact[k] = linear_apply(zin[k], weight(k), views[k].b);
        z = gelu_forward(preact[k]);
        if (actq) {
          zraw[k] = std::move(z);
          z = fake_quant_signed(zraw[k], act_step(kept[k], zraw[k]), bits);
        }
      }
      zin[L - 1] = std::move(z);
      out = linear_apply(zin[L - 1], weight(L - 1), views[L - 1].b);
      break;
    }
  }

  const float inv_n = 1.0f / static_cast<float>(out.size());
  Matrix diff = out - t;
  *loss_out = diff.squaredNorm() * inv_n;
  Matrix g = (2.0f * inv_n) * diff;

  auto layer_name = [&](std::size_t k) {
    return to_string(bb) + ".layer" + std::to_string(kept[k]);
  };
  // Applies the gradient to one layer view (weights, bias, learnable step).
  auto apply = [&](std::size_t k, const Matrix& gw_eff, const Vector& gb) {
    const int full = kept[k];
    if (!views[k].trainable) return;
    Matrix gw = gw_eff;
    if (is_q[k]) {
      auto sg = ste_backward(gw_eff, views[k].w, qs_->weight_steps[full], bits,
                             true);
      gw = std::move(sg.x);
      wstep_opt_[full].update(qs_->weight_steps[full], sg.step, lr);
      qs_->weight_steps[full] = positive(qs_->weight_steps[full]);
    }
    LayerOpt& o = opt_[full];
    const Index r = views[k].w.rows(), c = views[k].w.cols();
    adam_step<Matrix>(views[k].w, gw, o.w.m.topLeftCorner(r, c),
                      o.w.v.topLeftCorner(r, c), o.w.step, lr, o.w.params,
                      layer_name(k));
    ++o.w.step;
    adam_step<Vector>(views[k].b, gb, o.bm.head(c), o.bv.head(c), o.bstep, lr,
                      o.w.params, layer_name(k));
    ++o.bstep;
  };
  // Straight-through backward for an activation quantizer.
  auto act_ste = [&](Matrix& grad, std::size_t trace, int full) {
    auto sg =
        ste_backward(grad, zraw[trace], qs_->act_steps[full], bits, true);
    grad = std::move(sg.x);
    astep_opt_[full].update(qs_->act_steps[full], sg.step, lr);
    qs_->act_steps[full] = positive(qs_->act_steps[full]);
  };

  switch (bb) {
    case Backbone::siren: {
      for (std::size_t k = L; k-- > 0;) {
        auto lg = linear_backward(g, zin[k], weight(k));
        apply(k, lg.w, lg.b);
        if (k == 0) break;
        g = std::move(lg.x);
        if (actq) act_ste(g, k - 1, kept[k - 1]);
        g = sine_backward(g, preact[k - 1], omega);
      }
      break;
    }
    case Backbone::mfn: {
      const std::size_t d = (L - 1) / 2;
      auto lgl = linear_backward(g, zin[L - 1], weight(L - 1));
      apply(L - 1, lgl.w, lgl.b);
      g = std::move(lgl.x);
      for (std::size_t i = d; i-- > 0;) {
        const std::size_t fk = 2 * i, lk = 2 * i + 1;
        if (actq) act_ste(g, i, kept[lk]);
        Matrix ga = g.cwiseProduct(mfn_gfilt[i]);
        Matrix gpref = sine_backward(g.cwiseProduct(mfn_lina[i]), mfn_pref[i], 1.0f);
        auto lgf = linear_backward(gpref, x, weight(fk));
        apply(fk, lgf.w, lgf.b);
        auto lg = linear_backward(ga, zin[i], weight(lk));
        apply(lk, lg.w, lg.b);
        g = std::move(lg.x);
      }
      break;
    }
    case Backbone::fourier: {
      for (std::size_t k = L; k-- > 1;) {
        auto lg = linear_backward(g, zin[k], weight(k));
        apply(k, lg.w, lg.b);
        if (k == 1) break;  // the feature bank below is frozen
        g = std::move(lg.x);
        if (actq) act_ste(g, k - 1, kept[k - 1]);
        g = gelu_backward(g, preact[k - 1]);
      }
      break;
    }
  }
}

std::vector<float> TrainSession::run(int depth, int width, int iters) {
  if (iters < 0) throw ConfigError("negative iteration count");
  auto views = layer_views(net_, depth, width);
  const auto kept = kept_layer_indices(net_.config, depth);
  const float lr = tc_.learning_rate.value_or(
      default_learning_rate(net_.config.backbone));
  std::vector<float> losses;
  for (int i = 0; i < iters; ++i) {
    float loss = 0.0f;
    step(depth, width, kept, views, lr, &loss);
    if (!std::isfinite(loss)) {
      throw TrainingError("training diverged at iteration " +
                          std::to_string(total_steps_) + " (subnet " +
                          std::to_string(depth) + "x" + std::to_string(width) +
                          ")");
    }
    ++total_steps_;
    if ((i + 1) % tc_.log_every == 0 || i + 1 == iters) losses.push_back(loss);
  }
  return losses;
}

Matrix TrainSession::deployed_forward(int depth, int width) const {
  const auto kept = kept_layer_indices(net_.config, depth);
  auto views = layer_const_views(net_, depth, width);
  std::vector<Matrix> owned_w(views.size());
  std::vector<LayerConstView> eff;
  eff.reserve(views.size());
  for (std::size_t k = 0; k < views.size(); ++k) {
    const int full = kept[k];
    if (qs_ && qs_->policy_for(net_.config, full) == LayerPolicy::quantized) {
      owned_w[k] =
          fake_quant_signed(views[k].w, qs_->weight_steps[full], qs_->bits);
      eff.push_back({owned_w[k], views[k].b, views[k].kind, views[k].trainable});
    } else {
      eff.push_back(views[k]);
    }
  }
  return forward_layers(reduced_config(net_.config, depth, width), eff,
                        coords_);
}

float TrainSession::deployed_mse(int depth, int width) const {
  Matrix out = deployed_forward(depth, width);
  return (out - targets_).squaredNorm() / static_cast<float>(out.size());
}

FitResult fit(Network& net, const RgbImage& image, const TrainConfig& tc,
              QuantSpec* qs) {
  TrainSession session(net, image, tc, qs);
  FitResult r;
  r.loss = session.run(net.config.hidden_layers, net.config.hidden_width,
                       tc.iterations);
  r.final_loss = r.loss.empty() ? 0.0f : r.loss.back();
  return r;
}

}  // namespace ani
