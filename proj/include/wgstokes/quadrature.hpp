#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "mesh.hpp"

namespace wgstokes {

/// Gauss-Legendre nodes and weights on [0, 1].
struct LineRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline LineRule gauss_legendre(int n) {
  if (n < 1) {
    throw std::invalid_argument("gauss_legendre: n must be >= 1");
  }
  LineRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // Newton iteration on P_n from the Chebyshev-like initial guess.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) {
        break;
      }
    }
    rule.nodes[i] = 0.5 * (1.0 - x);
    rule.weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

/// Quadrature on a k-simplex in barycentric coordinates; weights sum to 1,
/// so an integral over a simplex S is |S| * sum_q w_q f(x_q).
template <int K>
struct SimplexRule {
  std::vector<std::array<double, K + 1>> bary;
  std::vector<double> weights;

  int size() const noexcept { return static_cast<int>(weights.size()); }
};

/// Collapsed-coordinate (Duffy) product of Gauss-Legendre rules with n points
/// per direction. Exact for polynomials of degree 2n - K on the K-simplex
/// (degree 2n - 1 on a segment).
template <int K>
SimplexRule<K> collapsed_gauss(int n) {
  static_assert(K >= 1 && K <= 3);
  const LineRule g = gauss_legendre(n);
  SimplexRule<K> rule;
  if constexpr (K == 1) {
    for (int i = 0; i < n; ++i) {
      rule.bary.push_back({1.0 - g.nodes[i], g.nodes[i]});
      rule.weights.push_back(g.weights[i]);
    }
  } else if constexpr (K == 2) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double u = g.nodes[i], v = g.nodes[j];
        const double x = u, y = v * (1.0 - u);
        rule.bary.push_back({1.0 - x - y, x, y});
        rule.weights.push_back(2.0 * g.weights[i] * g.weights[j] * (1.0 - u));
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        for (int l = 0; l < n; ++l) {
          const double u = g.nodes[i], v = g.nodes[j], t = g.nodes[l];
          const double x = u, y = v * (1.0 - u), z = t * (1.0 - u) * (1.0 - v);
          rule.bary.push_back({1.0 - x - y - z, x, y, z});
          rule.weights.push_back(6.0 * g.weights[i] * g.weights[j] * g.weights[l] * (1.0 - u) *
                                 (1.0 - u) * (1.0 - v));
        }
      }
    }
  }
  return rule;
}

/// Rule on the K-simplex exact for polynomials of the given degree.
template <int K>
SimplexRule<K> simplex_rule_of_degree(int degree) {
  const int n = K == 1 ? (degree + 2) / 2 : (degree + K + 1) / 2;
  return collapsed_gauss<K>(std::max(n, 1));
}

template <int K>
SimplexRule<K> centroid_rule() {
  SimplexRule<K> rule;
  std::array<double, K + 1> b{};
  b.fill(1.0 / (K + 1));
  rule.bary.push_back(b);
  rule.weights.push_back(1.0);
  return rule;
}

template <int Dim, std::size_t NV>
Point<Dim> map_bary(const std::array<Point<Dim>, NV>& verts, const std::array<double, NV>& b) {
  Point<Dim> x = Point<Dim>::Zero();
  for (std::size_t i = 0; i < NV; ++i) {
    x += b[i] * verts[i];
  }
  return x;
}

/// How the facet values Q_h g of the Dirichlet datum are computed.
struct BoundaryRule {
  enum class Kind { midpoint, gauss };
  Kind kind = Kind::midpoint;
  int points = 1; // points per direction for Kind::gauss

  static BoundaryRule midpoint() { return {Kind::midpoint, 1}; }
  static BoundaryRule gauss(int k) { return {Kind::gauss, k}; }

  std::string name() const {
    return kind == Kind::midpoint ? std::string("mid") : "gauss" + std::to_string(points);
  }

  static BoundaryRule parse(const std::string& s) {
    if (s == "mid" || s == "midpoint") {
      return midpoint();
    }
    if (s.rfind("gauss", 0) == 0 && s.size() > 5) {
      return gauss(std::stoi(s.substr(5)));
    }
    throw std::invalid_argument("unknown boundary rule '" + s + "'");
  }
};

inline constexpr int kMaxGaussFacetPoints = 5;

/// Facet rule for a boundary datum rule. Gauss(k) is the k-point
/// Gauss-Legendre rule on edges and its k x k collapsed product on
/// triangles.
template <int Dim>
SimplexRule<Dim - 1> facet_rule(const BoundaryRule& rule) {
  if (rule.kind == BoundaryRule::Kind::midpoint) {
    return centroid_rule<Dim - 1>();
  }
  if (rule.points < 1 || rule.points > kMaxGaussFacetPoints) {
    throw std::invalid_argument("unsupported Gauss facet rule with " + std::to_string(rule.points) +
                                " points");
  }
  return collapsed_gauss<Dim - 1>(rule.points);
}

} // namespace wgstokes
