#pragma once

#include <Eigen/Core>

namespace fuse {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat3x2 = Eigen::Matrix<double, 3, 2>;

// Tangent-space dimension of the compound state (see state.hpp for layout).
inline constexpr int kTangentDim = 23;
inline constexpr int kNoiseDim = 12;

using Vec23 = Eigen::Matrix<double, kTangentDim, 1>;
using Mat23 = Eigen::Matrix<double, kTangentDim, kTangentDim>;
using Mat23x12 = Eigen::Matrix<double, kTangentDim, kNoiseDim>;
using Mat12 = Eigen::Matrix<double, kNoiseDim, kNoiseDim>;
using RowVec23 = Eigen::Matrix<double, 1, kTangentDim>;

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using MatX23 = Eigen::Matrix<double, Eigen::Dynamic, kTangentDim>;

inline constexpr double kDefaultGravityMagnitude = 9.81;  // m/s^2

}  // namespace fuse
