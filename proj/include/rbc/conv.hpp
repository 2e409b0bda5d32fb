#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "rbc/errors.hpp"
#include "rbc/grid.hpp"

namespace rbc {

// Feature maps are stored as Matrix (channels, height*width) with spatial
// index p = y*width + x. Convolutions use 5x5 kernels with "same"-style zero
// padding: total padding k - stride, split floor/ceil (extra row/col at the
// bottom/right), so stride 1 preserves the shape and stride 2 halves it.

/// Geometry of one correlation; transposed layers reuse it with the roles
/// of input and output swapped.
struct ConvGeom {
  int in_ch = 1;
  int out_ch = 1;
  int in_h = 0;
  int in_w = 0;
  int stride = 1;
  static constexpr int k = 5;

  int pad_total() const { return k - stride; }
  int pad_top() const { return pad_total() / 2; }
  int pad_left() const { return pad_total() / 2; }
  int out_h() const { return in_h / stride; }
  int out_w() const { return in_w / stride; }

  void validate() const {
    if (in_h % stride != 0 || in_w % stride != 0)
      throw ShapeMismatch("ConvGeom: spatial dims not divisible by stride");
  }
};

namespace detail {

inline Matrix im2col(const ConvGeom& g, const Matrix& in) {
  const int oh = g.out_h(), ow = g.out_w();
  const int pt = g.pad_top(), pl = g.pad_left();
  Matrix col = Matrix::Zero(g.in_ch * ConvGeom::k * ConvGeom::k, oh * ow);
  for (int ci = 0; ci < g.in_ch; ++ci)
    for (int u = 0; u < ConvGeom::k; ++u)
      for (int v = 0; v < ConvGeom::k; ++v) {
        const int row = (ci * ConvGeom::k + u) * ConvGeom::k + v;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride - pt + u;
          if (iy < 0 || iy >= g.in_h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride - pl + v;
            if (ix < 0 || ix >= g.in_w) continue;
            col(row, oy * ow + ox) = in(ci, iy * g.in_w + ix);
          }
        }
      }
  return col;
}

inline Matrix col2im(const ConvGeom& g, const Matrix& col) {
  const int oh = g.out_h(), ow = g.out_w();
  const int pt = g.pad_top(), pl = g.pad_left();
  Matrix in = Matrix::Zero(g.in_ch, g.in_h * g.in_w);
  for (int ci = 0; ci < g.in_ch; ++ci)
    for (int u = 0; u < ConvGeom::k; ++u)
      for (int v = 0; v < ConvGeom::k; ++v) {
        const int row = (ci * ConvGeom::k + u) * ConvGeom::k + v;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride - pt + u;
          if (iy < 0 || iy >= g.in_h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride - pl + v;
            if (ix < 0 || ix >= g.in_w) continue;
            in(ci, iy * g.in_w + ix) += col(row, oy * ow + ox);
          }
        }
      }
  return in;
}

}  // namespace detail

/// out = W * im2col(in); W is (out_ch, in_ch*25).
inline Matrix conv_forward(const ConvGeom& g, const Matrix& w, const Matrix& in) {
  return w * detail::im2col(g, in);
}

/// Adjoint of conv_forward in its input argument.
inline Matrix conv_grad_input(const ConvGeom& g, const Matrix& w, const Matrix& gout) {
  return detail::col2im(g, w.transpose() * gout);
}

/// Adjoint of conv_forward in the weights: dW = gout * im2col(in)^T.
inline Matrix conv_grad_weight(const ConvGeom& g, const Matrix& in, const Matrix& gout) {
  return gout * detail::im2col(g, in).transpose();
}

inline double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

inline double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf =
      std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

inline Matrix gelu(const Matrix& x) { return x.unaryExpr([](double v) { return gelu(v); }); }

inline Matrix gelu_derivative(const Matrix& x) {
  return x.unaryExpr([](double v) { return gelu_derivative(v); });
}

inline Vector gelu(const Vector& x) { return x.unaryExpr([](double v) { return gelu(v); }); }

inline Vector gelu_derivative(const Vector& x) {
  return x.unaryExpr([](double v) { return gelu_derivative(v); });
}

}  // namespace rbc
