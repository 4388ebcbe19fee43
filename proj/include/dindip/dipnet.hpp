#pragma once

// Two-layer Deep Inverse Prior generator x = V phi(W u) / sqrt(k).
//
// Parameters are packed as theta = [V_1; ...; V_k; W^1; ...; W^k]: the k
// columns of V (n entries each) followed by the k rows of W (d entries each).
// With Eigen's column-major storage this means V maps directly onto the
// first n*k entries, and the W block is W^T stored as a d x k matrix.

#include "dindip/activation.hpp"
#include "dindip/common.hpp"
#include "dindip/linops.hpp"
#include "dindip/random.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <utility>

namespace dindip {

template <typename Scalar>
struct DipNetwork {
  Index width = 0;       // hidden neurons k
  Index input_dim = 0;   // d
  Index output_dim = 0;  // n
  VectorX<Scalar> input;  // fixed u, unit norm
  MatrixX<Scalar> w;      // k x d, initial hidden weights
  MatrixX<Scalar> v;      // n x k, initial output weights
  ActivationSpec<Scalar> act;
  Scalar v_bound = std::sqrt(Scalar(3));  // |V_ij(0)| <= v_bound

  Index parameter_count() const { return width * (input_dim + output_dim); }
};

template <typename Scalar>
VectorX<Scalar> pack(const MatrixX<Scalar>& w, const MatrixX<Scalar>& v) {
  require_dims(w.rows() == v.cols(), "pack: W rows and V columns must both equal the width");
  const Index k = w.rows(), d = w.cols(), n = v.rows();
  VectorX<Scalar> theta(k * (n + d));
  Eigen::Map<MatrixX<Scalar>>(theta.data(), n, k) = v;
  Eigen::Map<MatrixX<Scalar>>(theta.data() + n * k, d, k) = w.transpose();
  return theta;
}

template <typename Scalar>
std::pair<MatrixX<Scalar>, MatrixX<Scalar>> unpack(const DipNetwork<Scalar>& net, const VectorX<Scalar>& theta) {
  const Index k = net.width, d = net.input_dim, n = net.output_dim;
  require_dims(theta.size() == k * (d + n), "unpack: parameter vector length must be k*(d+n)");
  MatrixX<Scalar> v = Eigen::Map<const MatrixX<Scalar>>(theta.data(), n, k);
  MatrixX<Scalar> w = Eigen::Map<const MatrixX<Scalar>>(theta.data() + n * k, d, k).transpose();
  return {std::move(w), std::move(v)};
}

template <typename Scalar>
VectorX<Scalar> initial_parameters(const DipNetwork<Scalar>& net) {
  return pack(net.w, net.v);
}

/// u uniform on the sphere, W(0) ~ N(0, 1), V(0) ~ U(-sqrt 3, sqrt 3).
template <typename Scalar>
DipNetwork<Scalar> init_network(Index width, Index input_dim, Index output_dim, const ActivationSpec<Scalar>& act,
                                std::uint64_t seed) {
  require_dims(width >= 1 && input_dim >= 1 && output_dim >= 1, "network dimensions must be >= 1");
  SplitMix64 rng(derive_seed(seed, Stream::Network));
  DipNetwork<Scalar> net;
  net.width = width;
  net.input_dim = input_dim;
  net.output_dim = output_dim;
  net.act = act;
  net.input = gaussian_vector<Scalar>(input_dim, Scalar(1), rng);
  net.input /= net.input.norm();
  net.w = gaussian_matrix<Scalar>(width, input_dim, Scalar(1), rng);
  net.v = uniform_matrix<Scalar>(output_dim, width, -net.v_bound, net.v_bound, rng);
  return net;
}

namespace detail {

template <typename Scalar>
void check_parameters(const DipNetwork<Scalar>& net, const VectorX<Scalar>& theta) {
  require_dims(theta.size() == net.parameter_count(), "parameter vector length must be k*(d+n)");
  if (!theta.allFinite()) throw NumericalError("non-finite network parameters");
}

template <typename Scalar>
Eigen::Map<const MatrixX<Scalar>> output_weights(const DipNetwork<Scalar>& net, const VectorX<Scalar>& theta) {
  return {theta.data(), net.output_dim, net.width};
}

template <typename Scalar>
Eigen::Map<const MatrixX<Scalar>> hidden_weights_t(const DipNetwork<Scalar>& net, const VectorX<Scalar>& theta) {
  return {theta.data() + net.output_dim * net.width, net.input_dim, net.width};
}

template <typename Scalar>
struct Hidden {
  VectorX<Scalar> pre;    // W u
  VectorX<Scalar> post;   // phi(W u)
  VectorX<Scalar> slope;  // phi'(W u)
};

template <typename Scalar>
Hidden<Scalar> hidden_layer(const DipNetwork<Scalar>& net, const VectorX<Scalar>& theta) {
  Hidden<Scalar> h;
  h.pre.noalias() = hidden_weights_t(net, theta).transpose() * net.input;
  h.post.resize(h.pre.size());
  h.slope.resize(h.pre.size());
  for (Index i = 0; i < h.pre.size(); ++i) {
    h.post[i] = net.act.value(h.pre[i]);
    h.slope[i] = net.act.derivative(h.pre[i], h.post[i]);
  }
  return h;
}

}  // namespace detail

template <typename Scalar>
VectorX<Scalar> forward(const DipNetwork<Scalar>& net, const VectorX<Scalar>& theta) {
  detail::check_parameters(net, theta);
  const VectorX<Scalar> pre = detail::hidden_weights_t(net, theta).transpose() * net.input;
  const VectorX<Scalar> post = pre.unaryExpr([&](Scalar x) { return net.act.value(x); });
  return detail::output_weights(net, theta) * post / std::sqrt(Scalar(net.width));
}

/// Dense n x p Jacobian, column blocks in pack() order.
template <typename Scalar>
MatrixX<Scalar> jacobian(const DipNetwork<Scalar>& net, const VectorX<Scalar>& theta) {
  detail::check_parameters(net, theta);
  const Index k = net.width, d = net.input_dim, n = net.output_dim;
  const auto h = detail::hidden_layer(net, theta);
  const auto v = detail::output_weights(net, theta);
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(k));
  MatrixX<Scalar> jac = MatrixX<Scalar>::Zero(n, k * (n + d));
  for (Index i = 0; i < k; ++i) {
    jac.block(0, i * n, n, n).diagonal().setConstant(scale * h.post[i]);
    jac.block(0, n * k + i * d, n, d).noalias() = (scale * h.slope[i]) * v.col(i) * net.input.transpose();
  }
  return jac;
}

/// J J^T = (1/k) [ |phi(Wu)|^2 I + |u|^2 sum_i phi'(W^i u)^2 V_i V_i^T ], without forming J.
template <typename Scalar>
MatrixX<Scalar> gram(const DipNetwork<Scalar>& net, const VectorX<Scalar>& theta) {
  detail::check_parameters(net, theta);
  const auto h = detail::hidden_layer(net, theta);
  const auto v = detail::output_weights(net, theta);
  const Scalar k = Scalar(net.width);
  const MatrixX<Scalar> weighted = v * h.slope.asDiagonal();
  MatrixX<Scalar> g = (net.input.squaredNorm() / k) * (weighted * weighted.transpose());
  g.diagonal().array() += h.post.squaredNorm() / k;
  return g;
}

template <typename Scalar>
struct JacobianSpectrum {
  Scalar sigma_min{};
  Scalar sigma_max{};
};

/// Extreme singular values of J from the eigenvalues of the n x n Gram matrix.
template <typename Scalar>
JacobianSpectrum<Scalar> jacobian_spectrum(const DipNetwork<Scalar>& net, const VectorX<Scalar>& theta) {
  require_dims(net.output_dim <= net.parameter_count(), "sigma_min(J) needs n <= p");
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(gram(net, theta), Eigen::EigenvaluesOnly);
  const auto& lambda = eig.eigenvalues();
  return {std::sqrt(std::max(lambda[0], Scalar(0))), std::sqrt(std::max(lambda[lambda.size() - 1], Scalar(0)))};
}

template <typename Scalar>
Scalar sigma_min_jacobian(const DipNetwork<Scalar>& net, const VectorX<Scalar>& theta) {
  return jacobian_spectrum(net, theta).sigma_min;
}

/// L(theta) = 1/2 |A g(theta) - y|^2 and grad = J^T A^T (A g - y).
template <typename Scalar>
Evaluation<Scalar> loss_and_grad(const DipNetwork<Scalar>& net, const VectorX<Scalar>& theta,
                                 const InverseProblem<Scalar>& problem) {
  detail::check_parameters(net, theta);
  require_dims(problem.signal_dim() == net.output_dim, "network output does not match operator input");
  const Index k = net.width, d = net.input_dim, n = net.output_dim;
  const auto h = detail::hidden_layer(net, theta);
  const auto v = detail::output_weights(net, theta);
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(k));

  const VectorX<Scalar> x = scale * (v * h.post);
  const VectorX<Scalar> residual = problem.op.apply(x) - problem.y;
  const VectorX<Scalar> back = problem.op.apply_adjoint(residual);

  Evaluation<Scalar> out;
  out.loss = Scalar(0.5) * residual.squaredNorm();
  out.grad.resize(theta.size());
  Eigen::Map<MatrixX<Scalar>>(out.grad.data(), n, k).noalias() = scale * back * h.post.transpose();
  const VectorX<Scalar> coeff = scale * h.slope.cwiseProduct(v.transpose() * back);
  Eigen::Map<MatrixX<Scalar>>(out.grad.data() + n * k, d, k).noalias() = net.input * coeff.transpose();
  if (!std::isfinite(out.loss)) throw NumericalError("non-finite loss");
  return out;
}

/// Upper bound 2B(1 + nD + radius)/sqrt(k) on the Lipschitz constant of J over
/// a ball of the given radius around the initialization.
template <typename Scalar>
Scalar jacobian_lipschitz_bound(const DipNetwork<Scalar>& net, Scalar radius) {
  if (radius < Scalar(0)) throw ConfigError("radius must be nonnegative");
  return Scalar(2) * net.act.bound * (Scalar(1) + Scalar(net.output_dim) * net.v_bound + radius) /
         std::sqrt(Scalar(net.width));
}

/// theta -> 1/2 |A g(u, theta) - y|^2 for a fixed network and problem.
template <typename S>
class DipObjective {
 public:
  using Scalar = S;

  DipObjective(const DipNetwork<Scalar>& net, const InverseProblem<Scalar>& problem) : net_(&net), problem_(&problem) {
    require_dims(problem.signal_dim() == net.output_dim, "network output does not match operator input");
  }

  Index dimension() const { return net_->parameter_count(); }
  Evaluation<Scalar> evaluate(const VectorX<Scalar>& theta) const { return loss_and_grad(*net_, theta, *problem_); }

  VectorX<Scalar> signal(const VectorX<Scalar>& theta) const { return forward(*net_, theta); }
  Scalar signal_error(const VectorX<Scalar>& theta) const { return (signal(theta) - problem_->x_true).norm(); }
  Scalar observation_error(const VectorX<Scalar>& theta) const {
    return (problem_->op.apply(signal(theta)) - problem_->y_clean).norm();
  }

  const DipNetwork<Scalar>& network() const { return *net_; }
  const InverseProblem<Scalar>& problem() const { return *problem_; }

 private:
  const DipNetwork<Scalar>* net_;
  const InverseProblem<Scalar>* problem_;
};

}  // namespace dindip
