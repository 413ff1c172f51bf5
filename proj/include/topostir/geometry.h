#pragma once

#include <complex>

#include <Eigen/Dense>

namespace topostir {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Complex = std::complex<double>;

inline Complex to_complex(const Vec2& v) { return {v.x(), v.y()}; }
inline Vec2 to_vec(Complex z) { return {z.real(), z.imag()}; }

}  // namespace topostir
