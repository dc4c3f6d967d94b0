#pragma once

#include "ani/common.hpp"

namespace ani {

/// y = sin(omega * a). omega = 1 turns this into the plain MFN filter sine.
template <class D>
MatX<typename D::Scalar> sine_forward(const Eigen::MatrixBase<D>& a,
                                      typename D::Scalar omega) {
  return (omega * a.array()).sin().matrix();
}

/// dL/da given dL/dy and the pre-activation a.
template <class DG, class DA>
MatX<typename DG::Scalar> sine_backward(const Eigen::MatrixBase<DG>& grad_y,
                                        const Eigen::MatrixBase<DA>& a,
                                        typename DA::Scalar omega) {
  return (grad_y.array() * omega * (omega * a.array()).cos()).matrix();
}

/// Exact GELU, x * Phi(x) with the normal CDF.
template <class D>
MatX<typename D::Scalar> gelu_forward(const Eigen::MatrixBase<D>& a) {
  using S = typename D::Scalar;
  return a.unaryExpr([](S v) {
    return S(0.5) * v * (S(1) + std::erf(v * S(0.7071067811865476)));
  });
}

template <class DG, class DA>
MatX<typename DG::Scalar> gelu_backward(const Eigen::MatrixBase<DG>& grad_y,
                                        const Eigen::MatrixBase<DA>& a) {
  using S = typename DG::Scalar;
  MatX<S> slope = a.unaryExpr([](S v) {
    const S cdf = S(0.5) * (S(1) + std::erf(v * S(0.7071067811865476)));
    const S pdf = S(0.3989422804014327) * std::exp(S(-0.5) * v * v);
    return cdf + v * pdf;
  });
  return (grad_y.array() * slope.array()).matrix();
}

}  // namespace ani
