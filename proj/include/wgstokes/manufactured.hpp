#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "mesh.hpp"

namespace wgstokes {

/// Analytic Stokes solution on the unit square/cube with its source term.
template <int Dim>
struct ManufacturedCase {
  using P = Point<Dim>;
  using Jacobian = Eigen::Matrix<double, Dim, Dim>;

  std::string name;
  double mu = 1.0;
  std::function<P(const P&)> u;
  std::function<double(const P&)> p;
  std::function<Jacobian(const P&)> grad_u; // row c is grad of component c
  std::function<P(const P&)> f;
};

/// u = (-e^x (y cos y + sin y), e^x y sin y), p = 2 e^x sin y.
inline ManufacturedCase<2> stokes_2d(double mu) {
  using P = Point<2>;
  ManufacturedCase<2> c;
  c.name = "exp-sin-2d";
  c.mu = mu;
  c.u = [](const P& x) {
    const double ex = std::exp(x[0]), s = std::sin(x[1]), co = std::cos(x[1]);
    return P(-ex * (x[1] * co + s), ex * x[1] * s);
  };
  c.p = [](const P& x) { return 2.0 * std::exp(x[0]) * std::sin(x[1]); };
  c.grad_u = [](const P& x) {
    const double ex = std::exp(x[0]), y = x[1], s = std::sin(y), co = std::cos(y);
    Eigen::Matrix2d g;
    g << -ex * (y * co + s), -ex * (2.0 * co - y * s),
        ex * y * s, ex * (s + y * co);
    return g;
  };
  c.f = [mu](const P& x) {
    const double ex = std::exp(x[0]);
    return P(2.0 * (1.0 - mu) * ex * std::sin(x[1]), 2.0 * (1.0 - mu) * ex * std::cos(x[1]));
  };
  return c;
}

/// u = (2 sin(pi x), -pi y cos(pi x), -pi z cos(pi x)),
/// p = sin(pi x) cos(pi y) sin(pi z).
inline ManufacturedCase<3> stokes_3d(double mu) {
  using P = Point<3>;
  constexpr double pi = std::numbers::pi;
  ManufacturedCase<3> c;
  c.name = "sin-cos-3d";
  c.mu = mu;
  c.u = [](const P& x) {
    const double cx = std::cos(pi * x[0]);
    return P(2.0 * std::sin(pi * x[0]), -pi * x[1] * cx, -pi * x[2] * cx);
  };
  c.p = [](const P& x) {
    return std::sin(pi * x[0]) * std::cos(pi * x[1]) * std::sin(pi * x[2]);
  };
  c.grad_u = [](const P& x) {
    const double sx = std::sin(pi * x[0]), cx = std::cos(pi * x[0]);
    Eigen::Matrix3d g;
    g << 2.0 * pi * cx, 0.0, 0.0,
        pi * pi * x[1] * sx, -pi * cx, 0.0,
        pi * pi * x[2] * sx, 0.0, -pi * cx;
    return g;
  };
  c.f = [mu](const P& x) {
    const double sx = std::sin(pi * x[0]), cx = std::cos(pi * x[0]);
    const double sy = std::sin(pi * x[1]), cy = std::cos(pi * x[1]);
    const double sz = std::sin(pi * x[2]), cz = std::cos(pi * x[2]);
    return P(2.0 * mu * pi * pi * sx + pi * cx * cy * sz,
             -mu * pi * pi * pi * x[1] * cx - pi * sy * sx * sz,
             -mu * pi * pi * pi * x[2] * cx + pi * sx * cy * cz);
  };
  return c;
}

template <int Dim>
ManufacturedCase<Dim> default_case(double mu) {
  if constexpr (Dim == 2) {
    return stokes_2d(mu);
  } else {
    return stokes_3d(mu);
  }
}

} // namespace wgstokes
