#pragma once

#include <Eigen/Dense>

#include "topowave/common.hpp"

namespace topowave::linalg {

struct EighResult {
  Eigen::VectorXd values;
  Eigen::MatrixXcd vectors;  // column k is the eigenvector of values[k]
};

// All eigenvalues of a Hermitian matrix, ascending. Throws NumericError on
// LAPACK failure.
Eigen::VectorXd eigvalsh(const Eigen::MatrixXcd& a);

// Lowest `count` eigenpairs.
EighResult eigh_smallest(const Eigen::MatrixXcd& a, int count);

// All eigenpairs with eigenvalue <= ceiling.
EighResult eigh_below(const Eigen::MatrixXcd& a, double ceiling);

}  // namespace topowave::linalg
