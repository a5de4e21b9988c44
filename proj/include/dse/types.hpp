#pragma once

#include <Eigen/Dense>
#include <complex>

namespace dse {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

}  // namespace dse
