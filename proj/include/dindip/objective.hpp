#pragma once

#include "dindip/common.hpp"

#include <concepts>

namespace dindip {

/// Anything the optimizers can drive: a smooth loss over a flat parameter
/// vector that returns its value and gradient together.
template <typename T>
concept Objective = requires(const T& obj, const VectorX<typename T::Scalar>& theta) {
  typename T::Scalar;
  { obj.dimension() } -> std::convertible_to<Index>;
  { obj.evaluate(theta) } -> std::same_as<Evaluation<typename T::Scalar>>;
};

/// Objectives that know the ground truth and can report recovery errors.
template <typename T>
concept DiagnosedObjective = Objective<T> && requires(const T& obj, const VectorX<typename T::Scalar>& theta) {
  { obj.signal_error(theta) } -> std::convertible_to<typename T::Scalar>;
  { obj.observation_error(theta) } -> std::convertible_to<typename T::Scalar>;
};

}  // namespace dindip
