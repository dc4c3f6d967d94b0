#pragma once

#include <cmath>
#include <cstdint>

#include "ani/common.hpp"

namespace ani {

/// Largest positive code weight for the LSQ gradient scale and step init.
inline int qmax_signed(int bits) { return (1 << (bits - 1)) - 1; }
inline int qmax_unsigned(int bits) { return (1 << bits) - 1; }
inline int code_count(int bits) { return 1 << bits; }

namespace detail {
inline void check_quant_args(double s, int bits) {
  if (!(s > 0.0)) throw ConfigError("quantizer: step size must be > 0");
  if (bits < 2 || bits > 8) throw ConfigError("quantizer: bits must be in [2,8]");
}
}  // namespace detail

/// Symmetric fake quantization. The input is clipped to [-s, s], mapped onto
/// 2^n codes and reconstructed; codes are clamped to [0, 2^n - 1] so they fit
/// n bits (the nominal +1.0 endpoint collapses onto the next level down).
template <class S>
S fake_quant_signed(S x, S s, int bits, int* code = nullptr) {
  detail::check_quant_args(static_cast<double>(s), bits);
  const S half = S(1 << (bits - 1));
  S u = x / s;
  u = u < S(-1) ? S(-1) : (u > S(1) ? S(1) : u);
  S q = std::round((u + S(1)) * half);
  const S qtop = S((1 << bits) - 1);
  q = q < S(0) ? S(0) : (q > qtop ? qtop : q);
  if (code) *code = static_cast<int>(q);
  return (q / half - S(1)) * s;
}

/// Unsigned variant for strictly positive signals: [0, s] onto 2^n - 1 steps.
template <class S>
S fake_quant_unsigned(S x, S s, int bits, int* code = nullptr) {
  detail::check_quant_args(static_cast<double>(s), bits);
  const S levels = S((1 << bits) - 1);
  S u = x / s;
  u = u < S(0) ? S(0) : (u > S(1) ? S(1) : u);
  S q = std::round(u * levels);
  if (code) *code = static_cast<int>(q);
  return q / levels * s;
}

template <class D>
MatX<typename D::Scalar> fake_quant_signed(const Eigen::MatrixBase<D>& x,
                                           typename D::Scalar s, int bits) {
  using S = typename D::Scalar;
  detail::check_quant_args(static_cast<double>(s), bits);
  const S half = S(1 << (bits - 1));
  const S qtop = S((1 << bits) - 1);
  auto u = (x.array() / s).cwiseMax(S(-1)).cwiseMin(S(1));
  auto q = ((u + S(1)) * half).round().cwiseMin(qtop);
  return ((q / half - S(1)) * s).matrix();
}

template <class D>
MatX<typename D::Scalar> fake_quant_unsigned(const Eigen::MatrixBase<D>& x,
                                             typename D::Scalar s, int bits) {
  using S = typename D::Scalar;
  detail::check_quant_args(static_cast<double>(s), bits);
  const S levels = S((1 << bits) - 1);
  auto u = (x.array() / s).cwiseMax(S(0)).cwiseMin(S(1));
  return ((u * levels).round() / levels * s).matrix();
}

/// Integer codes for storage; dequantize_codes is the exact inverse map.
template <class D>
MatX<std::uint8_t> quantize_codes_signed(const Eigen::MatrixBase<D>& x,
                                         typename D::Scalar s, int bits) {
  using S = typename D::Scalar;
  detail::check_quant_args(static_cast<double>(s), bits);
  return x.unaryExpr([=](S v) {
    int code = 0;
    fake_quant_signed<S>(v, s, bits, &code);
    return static_cast<std::uint8_t>(code);
  });
}

inline float dequantize_code(std::uint8_t code, float s, int bits) {
  const float half = static_cast<float>(1 << (bits - 1));
  return (static_cast<float>(code) / half - 1.0f) * s;
}

inline Matrix dequantize_codes(const MatX<std::uint8_t>& codes, float s,
                               int bits) {
  return codes.unaryExpr(
      [=](std::uint8_t c) { return dequantize_code(c, s, bits); });
}

/// LSQ gradient scale; keeps the step-size update magnitude comparable to the
/// weight updates regardless of tensor size.
template <class S>
S lsq_grad_scale(Index n_elements, int bits, bool is_signed) {
  const double qm = is_signed ? qmax_signed(bits) : qmax_unsigned(bits);
  return static_cast<S>(1.0 / std::sqrt(static_cast<double>(n_elements) * qm));
}

/// Level-spacing initialization, 2*mean(|x|)/sqrt(qmax).
template <class D>
typename D::Scalar lsq_step_init(const Eigen::MatrixBase<D>& x, int bits,
                                 bool is_signed) {
  using S = typename D::Scalar;
  const double qm = is_signed ? qmax_signed(bits) : qmax_unsigned(bits);
  double mean_abs =
      x.size() > 0 ? x.array().abs().template cast<double>().mean() : 0.0;
  double s = 2.0 * mean_abs / std::sqrt(qm);
  return static_cast<S>(s > 1e-8 ? s : 1e-8);
}

/// The quantizer's s is the full clipping factor, i.e. 2^(n-1) level
/// spacings; initializing the spacing per the formula above and converting
/// keeps the realized grid identical to the integer-range formulation.
template <class D>
typename D::Scalar lsq_clip_init(const Eigen::MatrixBase<D>& x, int bits) {
  return static_cast<typename D::Scalar>(1 << (bits - 1)) *
         lsq_step_init(x, bits, true);
}

template <class S>
struct SteGrads {
  MatX<S> x;  // pass-through inside the clip range, zero outside
  S step;     // dL/ds, already multiplied by the LSQ gradient scale
};

/// Straight-through backward for both fake_quant flavors.
///
/// d(xhat)/ds is (xhat - x)/s inside the clip range and xhat/s at saturation,
/// which is the realized clamp level (-1 and 1 - 2^(1-n) signed, 0 and 1
/// unsigned); self-consistent with the forward, so finite differences agree.
template <class DG, class DX>
SteGrads<typename DG::Scalar> ste_backward(
    const Eigen::MatrixBase<DG>& grad_out, const Eigen::MatrixBase<DX>& x,
    typename DX::Scalar s, int bits, bool is_signed) {
  using S = typename DG::Scalar;
  detail::check_quant_args(static_cast<double>(s), bits);
  if (grad_out.rows() != x.rows() || grad_out.cols() != x.cols()) {
    throw DimensionError("ste_backward: grad" +
                         shape_str(grad_out.rows(), grad_out.cols()) + " vs x" +
                         shape_str(x.rows(), x.cols()));
  }
  const S lo = is_signed ? S(-1) : S(0);
  MatX<S> xhat = is_signed ? fake_quant_signed(x, s, bits)
                           : fake_quant_unsigned(x, s, bits);
  auto u = x.array() / s;
  auto inside = (u >= lo && u <= S(1));
  auto d = inside.select((xhat.array() - x.array()) / s, xhat.array() / s);
  SteGrads<S> g;
  g.x = inside.select(grad_out.array(), S(0)).matrix();
  g.step = (grad_out.array() * d).sum() *
           lsq_grad_scale<S>(x.size(), bits, is_signed);
  return g;
}

}  // namespace ani
