// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

namespace reflectkd {

using Vector = Eigen::VectorXd;
/// Row-major so that a row (one position's logits, one token's embedding)
/// is contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace reflectkd
