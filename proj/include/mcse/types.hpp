// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>

#include <Eigen/Dense>

namespace mcse {

// Dense working types. The library computes in double precision throughout;
// the scalar-templated aliases are kept for callers that need another scalar.
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Arr = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Arr2 = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Real = double;
using Complex = std::complex<Real>;
using Index = Eigen::Index;

using RealVec = Vec<Real>;
using RealMat = Mat<Real>;
using RealArr = Arr<Real>;
using RealArr2 = Arr2<Real>;
using ComplexVec = Vec<Complex>;
using ComplexMat = Mat<Complex>;
using ComplexArr = Arr<Complex>;
using ComplexArr2 = Arr2<Complex>;
using Vec3 = Eigen::Matrix<Real, 3, 1>;

inline constexpr Real kSpeedOfSound = 343.0;  // m/s

}  // namespace mcse
