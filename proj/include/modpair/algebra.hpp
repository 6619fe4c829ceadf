#pragma once

#include <Eigen/Core>

namespace modpair {

/// All numerics run in double precision; tolerances in the test suite
/// assume it.
using Scalar = double;

template <typename T>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVectorX = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using Matrix = MatrixX<Scalar>;
using RowVector = RowVectorX<Scalar>;
using MaskMatrix = MatrixX<bool>;

}  // namespace modpair
