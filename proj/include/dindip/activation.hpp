#pragma once

#include "dindip/common.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <string>

namespace dindip {

enum class ActivationKind { Sigmoid, Tanh, Identity };

inline std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Sigmoid: return "sigmoid";
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::Identity: return "identity";
  }
  return "unknown";
}

inline ActivationKind parse_activation(const std::string& name) {
  if (name == "sigmoid") return ActivationKind::Sigmoid;
  if (name == "tanh") return ActivationKind::Tanh;
  if (name == "identity") return ActivationKind::Identity;
  throw ConfigError("unknown activation '" + name + "'");
}

/// Physicists' Gauss-Hermite rule: sum_i w_i f(x_i) ~ int f(x) exp(-x^2) dx.
template <typename Scalar>
struct QuadratureRule {
  VectorX<Scalar> nodes;
  VectorX<Scalar> weights;
};

/// Golub-Welsch: nodes are the eigenvalues of the symmetric Jacobi matrix of
/// the Hermite recurrence, weights sqrt(pi) times the squared first
/// eigenvector components.
template <typename Scalar>
QuadratureRule<Scalar> gauss_hermite_rule(Index count) {
  MatrixX<Scalar> jacobi = MatrixX<Scalar>::Zero(count, count);
  for (Index i = 1; i < count; ++i) {
    const Scalar off = std::sqrt(Scalar(i) / Scalar(2));
    jacobi(i, i - 1) = off;
    jacobi(i - 1, i) = off;
  }
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(jacobi);
  QuadratureRule<Scalar> rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = std::sqrt(std::numbers::pi_v<Scalar>) * eig.eigenvectors().row(0).transpose().array().square();
  return rule;
}

/// E[f(X)] for X ~ N(0, 1).
template <typename Scalar, typename F>
Scalar gaussian_expectation(F&& f, Index nodes = 64) {
  const auto rule = gauss_hermite_rule<Scalar>(nodes);
  Scalar acc = 0;
  for (Index i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * f(std::sqrt(Scalar(2)) * rule.nodes[i]);
  return acc / std::sqrt(std::numbers::pi_v<Scalar>);
}

template <typename Scalar>
struct ActivationSpec {
  ActivationKind kind = ActivationKind::Sigmoid;
  Scalar bound = 0;          // sup |phi'| and Lipschitz constant of phi'
  Scalar c_phi = 0;          // sqrt(E[phi(X)^2])
  Scalar c_phi_prime = 0;    // sqrt(E[phi'(X)^2])

  Scalar value(Scalar x) const {
    switch (kind) {
      case ActivationKind::Sigmoid:
        if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
        else {
          const Scalar e = std::exp(x);
          return e / (Scalar(1) + e);
        }
      case ActivationKind::Tanh: return std::tanh(x);
      case ActivationKind::Identity: return x;
    }
    return x;
  }

  Scalar derivative(Scalar x) const {
    switch (kind) {
      case ActivationKind::Sigmoid: {
        const Scalar s = value(x);
        return s * (Scalar(1) - s);
      }
      case ActivationKind::Tanh: {
        const Scalar t = std::tanh(x);
        return Scalar(1) - t * t;
      }
      case ActivationKind::Identity: return Scalar(1);
    }
    return Scalar(1);
  }

  /// phi'(x) given phi(x) already evaluated.
  Scalar derivative(Scalar x, Scalar phi_x) const {
    switch (kind) {
      case ActivationKind::Sigmoid: return phi_x * (Scalar(1) - phi_x);
      case ActivationKind::Tanh: return Scalar(1) - phi_x * phi_x;
      case ActivationKind::Identity: return Scalar(1);
    }
    return derivative(x);
  }
};

template <typename Scalar>
ActivationSpec<Scalar> make_activation(ActivationKind kind) {
  ActivationSpec<Scalar> spec;
  spec.kind = kind;
  switch (kind) {
    // sup sigma' = 1/4 at 0; sup |sigma''| = 1/(6 sqrt 3) < 1/4.
    case ActivationKind::Sigmoid: spec.bound = Scalar(0.25); break;
    // sup tanh' = 1; sup |tanh''| = 4/(3 sqrt 3) < 1.
    case ActivationKind::Tanh: spec.bound = Scalar(1); break;
    case ActivationKind::Identity: spec.bound = Scalar(1); break;
  }
  spec.c_phi = std::sqrt(gaussian_expectation<Scalar>([&](Scalar x) {
    const Scalar v = spec.value(x);
    return v * v;
  }));
  spec.c_phi_prime = std::sqrt(gaussian_expectation<Scalar>([&](Scalar x) {
    const Scalar v = spec.derivative(x);
    return v * v;
  }));
  return spec;
}

}  // namespace dindip
