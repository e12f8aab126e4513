#include <cmath>
#include <numbers>

#include "relucraft/smoothapprox.hpp"

namespace relucraft::smoothapprox {

namespace {

// d^n/dx^n exp(-x^2) = (-1)^n H_n(x) exp(-x^2), physicists' Hermite H_n.
double gauss_derivative(int n, double x) {
  double h0 = 1.0, h1 = 2.0 * x;
  double h = n == 0 ? h0 : h1;
  for (int m = 1; m < n; ++m) {
    h = 2.0 * x * h1 - 2.0 * m * h0;
    h0 = h1;
    h1 = h;
  }
  return (n % 2 ? -1.0 : 1.0) * h * std::exp(-x * x);
}

int order(std::span<const int> k) {
  int n = 0;
  for (int a : k) n += a;
  return n;
}

}  // namespace

SmoothTarget make_target(const std::string& name, int dim, double r) {
  if (dim < 1) throw InvalidInput("target dimension must be positive");
  if (!(r > 0.0) || !std::isfinite(r)) throw InvalidInput("smoothness must be positive");
  SmoothTarget f;
  f.name = name;
  f.dim = dim;
  f.r = r;
  if (name == "exp_neg_norm2") {
    f.value = [](std::span<const double> x) {
      double s = 0.0;
      for (double v : x) s += v * v;
      return std::exp(-s);
    };
    f.derivative = [](std::span<const int> k, std::span<const double> x) {
      double p = 1.0;
      for (std::size_t i = 0; i < x.size(); ++i) p *= gauss_derivative(k[i], x[i]);
      return p;
    };
  } else if (name == "sin_pi_x1") {
    f.value = [](std::span<const double> x) { return std::sin(std::numbers::pi * x[0]); };
    f.derivative = [](std::span<const int> k, std::span<const double> x) {
      for (std::size_t i = 1; i < k.size(); ++i)
        if (k[i] != 0) return 0.0;
      const int n = k[0];
      return std::pow(std::numbers::pi, n) * std::sin(std::numbers::pi * x[0] + n * std::numbers::pi / 2);
    };
  } else if (name == "prod_coords") {
    f.value = [](std::span<const double> x) {
      double p = 1.0;
      for (double v : x) p *= v;
      return p;
    };
    f.derivative = [](std::span<const int> k, std::span<const double> x) {
      double p = 1.0;
      for (std::size_t i = 0; i < x.size(); ++i) p *= k[i] == 0 ? x[i] : (k[i] == 1 ? 1.0 : 0.0);
      return p;
    };
  } else if (name == "linear_x1") {
    f.value = [](std::span<const double> x) { return x[0]; };
    f.derivative = [](std::span<const int> k, std::span<const double> x) {
      const int n = order(k);
      if (n == 0) return x[0];
      return n == 1 && k[0] == 1 ? 1.0 : 0.0;
    };
  } else if (name == "zero") {
    f.value = [](std::span<const double>) { return 0.0; };
    f.derivative = [](std::span<const int>, std::span<const double>) { return 0.0; };
  } else {
    throw InvalidInput("unknown target '" + name + "'");
  }
  return f;
}

std::vector<std::string> target_names() { return {"exp_neg_norm2", "sin_pi_x1", "prod_coords", "linear_x1", "zero"}; }

SmoothTarget scaled_target(const SmoothTarget& g, double factor) {
  SmoothTarget f = g;
  f.name = g.name + "_scaled";
  auto value = g.value;
  f.value = [value, factor](std::span<const double> x) {
    std::vector<double> y(x.begin(), x.end());
    for (double& v : y) v *= factor;
    return value(y);
  };
  if (g.derivative) {
    auto deriv = g.derivative;
    f.derivative = [deriv, factor](std::span<const int> k, std::span<const double> x) {
      std::vector<double> y(x.begin(), x.end());
      for (double& v : y) v *= factor;
      return std::pow(factor, order(k)) * deriv(k, y);
    };
  }
  return f;
}

SmoothTarget without_derivatives(SmoothTarget f) {
  f.derivative = nullptr;
  return f;
}

}  // namespace relucraft::smoothapprox
