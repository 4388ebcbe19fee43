#pragma once

// Linear forward operators y = A x and the inverse-problem instances built
// on them. Structured operators (circular blur, U diag(s) V^T) never
// materialize an m x n matrix outside of densify().

#include "dindip/common.hpp"
#include "dindip/random.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

namespace dindip {

enum class OperatorKind { Dense, CircularBlur, SvdComposed, Identity };

inline std::string to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::Dense: return "dense";
    case OperatorKind::CircularBlur: return "circular-gaussian-blur";
    case OperatorKind::SvdComposed: return "svd-composed";
    case OperatorKind::Identity: return "identity";
  }
  return "unknown";
}

template <typename Scalar>
struct SpectralSummary {
  Scalar sigma_max{};
  Scalar sigma_min_nz{};  // smallest singular value above the rank threshold
  Index rank{};
  Scalar kappa{};
};

/// Default relative threshold separating "non-zero" singular values.
inline constexpr double kRankTolerance = 1e-12;

template <typename Scalar>
class LinearOperator {
 public:
  using Vector = VectorX<Scalar>;
  using Matrix = MatrixX<Scalar>;

  static LinearOperator identity(Index n) {
    require_dims(n >= 1, "identity operator needs n >= 1");
    LinearOperator op(OperatorKind::Identity, n, n);
    return op;
  }

  static LinearOperator dense(Matrix a) {
    require_dims(a.rows() >= 1 && a.cols() >= 1, "dense operator needs a non-empty matrix");
    LinearOperator op(OperatorKind::Dense, a.rows(), a.cols());
    op.dense_ = std::move(a);
    return op;
  }

  /// Periodic 2-D Gaussian blur on a side x side grid. The kernel is separable,
  /// so A = C (x) C with C the side x side circulant of the 1-D kernel.
  static LinearOperator circular_blur(Index side, Scalar kernel_std) {
    require_dims(side >= 2, "blur operator needs side >= 2");
    if (!(kernel_std > Scalar(0))) throw ConfigError("blur kernel_std must be positive");
    LinearOperator op(OperatorKind::CircularBlur, side * side, side * side);
    op.side_ = side;
    op.kernel_std_ = kernel_std;

    Vector kernel(side);
    for (Index t = 0; t < side; ++t) {
      const Scalar dist = static_cast<Scalar>(std::min(t, side - t));
      kernel[t] = std::exp(-dist * dist / (Scalar(2) * kernel_std * kernel_std));
    }
    kernel /= kernel.sum();

    op.circulant_.resize(side, side);
    for (Index i = 0; i < side; ++i)
      for (Index j = 0; j < side; ++j) op.circulant_(i, j) = kernel[((i - j) % side + side) % side];

    // The kernel is even (k[t] = k[side - t]) so its DFT is real.
    op.kernel_spectrum_.resize(side);
    for (Index f = 0; f < side; ++f) {
      Scalar acc = 0;
      for (Index t = 0; t < side; ++t)
        acc += kernel[t] * std::cos(Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(f * t) / Scalar(side));
      op.kernel_spectrum_[f] = acc;
    }
    return op;
  }

  /// A = U diag(s) V^T with U (m x r), V (n x r) having orthonormal columns.
  static LinearOperator svd_composed(Matrix u, Vector s, Matrix v) {
    require_dims(u.cols() == s.size() && v.cols() == s.size(), "svd factors disagree on rank");
    LinearOperator op(OperatorKind::SvdComposed, u.rows(), v.rows());
    op.u_ = std::move(u);
    op.s_ = std::move(s);
    op.v_ = std::move(v);
    return op;
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  OperatorKind kind() const { return kind_; }
  Index grid_side() const { return side_; }
  Scalar kernel_std() const { return kernel_std_; }

  Vector apply(const Eigen::Ref<const Vector>& x) const {
    require_dims(x.size() == cols_, "operator apply: input has wrong size");
    switch (kind_) {
      case OperatorKind::Identity: return x;
      case OperatorKind::Dense: return dense_ * x;
      case OperatorKind::CircularBlur: return blur(x, false);
      case OperatorKind::SvdComposed: return u_ * (s_.asDiagonal() * (v_.transpose() * x));
    }
    return {};
  }

  Vector apply_adjoint(const Eigen::Ref<const Vector>& z) const {
    require_dims(z.size() == rows_, "operator adjoint: input has wrong size");
    switch (kind_) {
      case OperatorKind::Identity: return z;
      case OperatorKind::Dense: return dense_.transpose() * z;
      case OperatorKind::CircularBlur: return blur(z, true);
      case OperatorKind::SvdComposed: return v_ * (s_.asDiagonal() * (u_.transpose() * z));
    }
    return {};
  }

  /// Explicit m x n matrix. Test oracles and debugging only.
  Matrix densify() const {
    Matrix out(rows_, cols_);
    Vector e = Vector::Zero(cols_);
    for (Index j = 0; j < cols_; ++j) {
      e[j] = Scalar(1);
      out.col(j) = apply(e);
      e[j] = Scalar(0);
    }
    return out;
  }

  /// All min(m, n) singular values in descending order.
  Vector singular_values() const {
    Vector values;
    switch (kind_) {
      case OperatorKind::Identity: values = Vector::Ones(rows_); break;
      case OperatorKind::Dense: {
        Eigen::BDCSVD<Matrix> svd(dense_);
        values = svd.singularValues();
        break;
      }
      case OperatorKind::CircularBlur: {
        values.resize(side_ * side_);
        for (Index a = 0; a < side_; ++a)
          for (Index b = 0; b < side_; ++b)
            values[a * side_ + b] = std::abs(kernel_spectrum_[a] * kernel_spectrum_[b]);
        break;
      }
      case OperatorKind::SvdComposed: values = s_.cwiseAbs(); break;
    }
    std::sort(values.data(), values.data() + values.size(), std::greater<Scalar>());
    return values;
  }

 private:
  LinearOperator(OperatorKind kind, Index rows, Index cols) : kind_(kind), rows_(rows), cols_(cols) {}

  Vector blur(const Eigen::Ref<const Vector>& x, bool adjoint) const {
    Vector out(x.size());
    Eigen::Map<const Matrix> grid(x.data(), side_, side_);
    Eigen::Map<Matrix> result(out.data(), side_, side_);
    if (adjoint)
      result.noalias() = circulant_.transpose() * grid * circulant_;
    else
      result.noalias() = circulant_ * grid * circulant_.transpose();
    return out;
  }

  OperatorKind kind_;
  Index rows_;
  Index cols_;
  Matrix dense_;
  Index side_ = 0;
  Scalar kernel_std_ = 0;
  Matrix circulant_;
  Vector kernel_spectrum_;
  Matrix u_;
  Vector s_;
  Matrix v_;
};

template <typename Scalar>
SpectralSummary<Scalar> spectral_summary(const LinearOperator<Scalar>& op,
                                         Scalar rel_tol = Scalar(kRankTolerance)) {
  const VectorX<Scalar> values = op.singular_values();
  SpectralSummary<Scalar> out;
  out.sigma_max = values.size() ? values[0] : Scalar(0);
  if (!(out.sigma_max > Scalar(0))) throw NumericalError("rank-zero operator");
  const Scalar threshold = rel_tol * out.sigma_max;
  out.rank = 0;
  out.sigma_min_nz = out.sigma_max;
  for (Index i = 0; i < values.size(); ++i) {
    if (values[i] > threshold) {
      ++out.rank;
      out.sigma_min_nz = values[i];
    }
  }
  out.kappa = out.sigma_max / out.sigma_min_nz;
  return out;
}

/// Random matrix with orthonormal columns, Haar-distributed (QR of a Gaussian
/// matrix with the signs of diag(R) folded into Q).
template <typename Scalar>
MatrixX<Scalar> random_orthonormal(Index n, SplitMix64& rng) {
  const MatrixX<Scalar> g = gaussian_matrix<Scalar>(n, n, Scalar(1), rng);
  Eigen::HouseholderQR<MatrixX<Scalar>> qr(g);
  MatrixX<Scalar> q = qr.householderQ() * MatrixX<Scalar>::Identity(n, n);
  const MatrixX<Scalar>& r = qr.matrixQR();
  for (Index j = 0; j < n; ++j)
    if (r(j, j) < Scalar(0)) q.col(j) *= Scalar(-1);
  return q;
}

template <typename Scalar>
LinearOperator<Scalar> make_blur_operator(Index side, Scalar kernel_std) {
  return LinearOperator<Scalar>::circular_blur(side, kernel_std);
}

/// U diag(s) V^T with Haar U, V and s ~ U[1, 2]: kappa <= 2.
template <typename Scalar>
LinearOperator<Scalar> make_wellcond_operator(Index n, std::uint64_t seed) {
  require_dims(n >= 1, "well-conditioned operator needs n >= 1");
  SplitMix64 rng(derive_seed(seed, Stream::Operator));
  MatrixX<Scalar> u = random_orthonormal<Scalar>(n, rng);
  MatrixX<Scalar> v = random_orthonormal<Scalar>(n, rng);
  VectorX<Scalar> s = uniform_matrix<Scalar>(n, 1, Scalar(1), Scalar(2), rng);
  return LinearOperator<Scalar>::svd_composed(std::move(u), std::move(s), std::move(v));
}

template <typename Scalar>
struct InverseProblem {
  LinearOperator<Scalar> op;
  VectorX<Scalar> x_true;
  VectorX<Scalar> noise;
  VectorX<Scalar> y_clean;  // A x_true
  VectorX<Scalar> y;        // y_clean + noise
  Scalar snr{};             // |A x_true| / |noise|, +inf without noise

  Index signal_dim() const { return op.cols(); }
  Index observation_dim() const { return op.rows(); }
  Scalar noise_norm() const { return noise.norm(); }
};

template <typename Scalar>
InverseProblem<Scalar> make_problem(LinearOperator<Scalar> op, VectorX<Scalar> x_true, VectorX<Scalar> noise) {
  require_dims(x_true.size() == op.cols(), "signal does not match operator input dimension");
  require_dims(noise.size() == op.rows(), "noise does not match operator output dimension");
  VectorX<Scalar> y_clean = op.apply(x_true);
  VectorX<Scalar> y = y_clean + noise;
  const Scalar noise_norm = noise.norm();
  const Scalar snr = noise_norm > Scalar(0) ? y_clean.norm() / noise_norm : std::numeric_limits<Scalar>::infinity();
  return {std::move(op), std::move(x_true), std::move(noise), std::move(y_clean), std::move(y), snr};
}

template <typename Scalar>
InverseProblem<Scalar> make_noiseless_problem(LinearOperator<Scalar> op, VectorX<Scalar> x_true) {
  const Index m = op.rows();
  return make_problem(std::move(op), std::move(x_true), VectorX<Scalar>(VectorX<Scalar>::Zero(m)));
}

/// A with iid N(0, 1/sqrt(n)) entries (second parameter read as a standard
/// deviation), x_true ~ N(0, I_n), no noise.
template <typename Scalar>
InverseProblem<Scalar> make_gaussian_problem(Index n, Index m, std::uint64_t seed) {
  require_dims(n >= 1 && m >= 1, "gaussian problem needs n, m >= 1");
  SplitMix64 op_rng(derive_seed(seed, Stream::Operator));
  SplitMix64 signal_rng(derive_seed(seed, Stream::Signal));
  auto a = gaussian_matrix<Scalar>(m, n, Scalar(1) / std::sqrt(Scalar(n)), op_rng);
  auto x = gaussian_vector<Scalar>(n, Scalar(1), signal_rng);
  return make_noiseless_problem(LinearOperator<Scalar>::dense(std::move(a)), std::move(x));
}

/// iid N(0, stddev^2) noise.
template <typename Scalar>
VectorX<Scalar> gaussian_noise(Index m, Scalar stddev, std::uint64_t seed) {
  SplitMix64 rng(derive_seed(seed, Stream::Noise));
  return gaussian_vector<Scalar>(m, stddev, rng);
}

/// Same problem with a Gaussian noise direction rescaled to |eps| = |A x| / snr.
template <typename Scalar>
InverseProblem<Scalar> with_snr(const InverseProblem<Scalar>& clean, Scalar snr, std::uint64_t seed) {
  if (!(snr > Scalar(0))) throw ConfigError("snr must be positive");
  VectorX<Scalar> noise = gaussian_noise<Scalar>(clean.observation_dim(), Scalar(1), seed);
  noise *= clean.y_clean.norm() / (snr * noise.norm());
  return make_problem(clean.op, clean.x_true, std::move(noise));
}

}  // namespace dindip
