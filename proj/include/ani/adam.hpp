#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "ani/common.hpp"

namespace ani {

struct AdamParams {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

/// First/second moments for one parameter tensor. For a supernet layer the
/// moments are allocated at full size and sliced alongside the weights.
struct AdamState {
  Matrix m;
  Matrix v;
  long step = 0;
  AdamParams params;

  static AdamState zeros(Index rows, Index cols, AdamParams p = {}) {
    AdamState s;
    s.m = Matrix::Zero(rows, cols);
    s.v = Matrix::Zero(rows, cols);
    s.params = p;
    return s;
  }
};

/// One bias-corrected Adam step, in place. `param`, `grad`, `m`, `v` must all
/// share a shape; `step` is the count of updates already applied to this slice.
template <class Plain>
void adam_step(Eigen::Ref<Plain> param, const Eigen::Ref<const Plain>& grad,
               Eigen::Ref<Plain> m, Eigen::Ref<Plain> v, long step, float lr,
               const AdamParams& p, std::string_view tensor_name = {}) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols()) {
    throw DimensionError("adam_step: grad" + shape_str(grad.rows(), grad.cols()) +
                         " vs param" + shape_str(param.rows(), param.cols()));
  }
  if (!grad.allFinite()) {
    throw TrainingError("adam_step: non-finite gradient for tensor '" +
                        std::string(tensor_name) + "'");
  }
  const float b1 = p.beta1, b2 = p.beta2;
  m.array() = b1 * m.array() + (1.0f - b1) * grad.array();
  v.array() = b2 * v.array() + (1.0f - b2) * grad.array().square();
  const double t = static_cast<double>(step) + 1.0;
  const float bc1 = 1.0f - static_cast<float>(std::pow(b1, t));
  const float bc2 = 1.0f - static_cast<float>(std::pow(b2, t));
  param.array() -=
      lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + p.eps);
}

/// Whole-tensor convenience form; advances the state's step counter.
inline void adam_update(MatrixRef param, const ConstMatrixRef& grad,
                        AdamState& state, float lr,
                        std::string_view tensor_name = {}) {
  adam_step<Matrix>(param, grad, state.m, state.v, state.step, lr,
                    state.params, tensor_name);
  ++state.step;
}

/// Scalar Adam for the learnable quantization step sizes.
struct ScalarAdam {
  float m = 0.0f;
  float v = 0.0f;
  long step = 0;

  void update(float& param, float grad, float lr, const AdamParams& p = {}) {
    m = p.beta1 * m + (1.0f - p.beta1) * grad;
    v = p.beta2 * v + (1.0f - p.beta2) * grad * grad;
    const double t = static_cast<double>(step) + 1.0;
    const float bc1 = 1.0f - static_cast<float>(std::pow(p.beta1, t));
    const float bc2 = 1.0f - static_cast<float>(std::pow(p.beta2, t));
    param -= lr * (m / bc1) / (std::sqrt(v / bc2) + p.eps);
    ++step;
  }
};

}  // namespace ani
