#pragma once

#include "ani/common.hpp"

namespace ani {

/// Affine map over a batch of rows: out[r,c] = sum_k x[r,k]*w[k,c] + b[c].
template <class DX, class DW, class DB>
MatX<typename DX::Scalar> linear_apply(const Eigen::MatrixBase<DX>& x,
                                       const Eigen::MatrixBase<DW>& w,
                                       const Eigen::MatrixBase<DB>& b) {
  if (x.cols() != w.rows() || w.cols() != b.size()) {
    throw DimensionError("linear_apply: incompatible shapes x" +
                         shape_str(x.rows(), x.cols()) + " w" +
                         shape_str(w.rows(), w.cols()) + " b" +
                         shape_str(b.size(), 1));
  }
  return (x * w).rowwise() + b.transpose();
}

template <class S>
struct LinearGrads {
  MatX<S> x;  // dL/dx = g * w^T
  MatX<S> w;  // dL/dw = x^T * g
  VecX<S> b;  // dL/db = column sums of g
};

template <class DG, class DX, class DW>
LinearGrads<typename DG::Scalar> linear_backward(
    const Eigen::MatrixBase<DG>& grad_out, const Eigen::MatrixBase<DX>& x,
    const Eigen::MatrixBase<DW>& w) {
  if (grad_out.rows() != x.rows() || grad_out.cols() != w.cols() ||
      x.cols() != w.rows()) {
    throw DimensionError("linear_backward: incompatible shapes g" +
                         shape_str(grad_out.rows(), grad_out.cols()) + " x" +
                         shape_str(x.rows(), x.cols()) + " w" +
                         shape_str(w.rows(), w.cols()));
  }
  using S = typename DG::Scalar;
  LinearGrads<S> g;
  g.x.noalias() = grad_out * w.transpose();
  g.w.noalias() = x.transpose() * grad_out;
  g.b = grad_out.colwise().sum().transpose();
  return g;
}

}  // namespace ani
