#include "topowave/linalg.hpp"

#include <lapacke.h>

#include <complex>
#include <vector>

namespace topowave::linalg {

namespace {

lapack_complex_double* lp(std::complex<double>* p) {
  return reinterpret_cast<lapack_complex_double*>(p);
}

void check_square(const Eigen::MatrixXcd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw NumericError("eigensolve: matrix not square");
}

// zheevr on a working copy; range 'A'/'I'/'V' as in LAPACK
EighResult zheevr(const Eigen::MatrixXcd& a, char jobz, char range, int il, int iu, double vl,
                  double vu) {
  check_square(a);
  const int n = static_cast<int>(a.rows());
  Eigen::MatrixXcd work = a;  // column-major, overwritten
  EighResult res;
  res.values.resize(n);
  const int zcols = (jobz == 'V') ? (range == 'I' ? iu - il + 1 : n) : 1;
  res.vectors.resize(jobz == 'V' ? n : 0, jobz == 'V' ? zcols : 0);
  std::vector<int> isuppz(static_cast<size_t>(2 * std::max(1, zcols)));
  int m = 0;
  const int info = LAPACKE_zheevr(LAPACK_COL_MAJOR, jobz, range, 'L', n, lp(work.data()), n, vl,
                                  vu, il, iu, 0.0, &m, res.values.data(),
                                  jobz == 'V' ? lp(res.vectors.data()) : lp(work.data()),
                                  std::max(1, n), isuppz.data());
  if (info != 0) {
    throw NumericError("LAPACK zheevr failed with info=" + std::to_string(info));
  }
  res.values.conservativeResize(m);
  if (jobz == 'V') res.vectors.conservativeResize(n, m);
  return res;
}

}  // namespace

Eigen::VectorXd eigvalsh(const Eigen::MatrixXcd& a) {
  return zheevr(a, 'N', 'A', 0, 0, 0.0, 0.0).values;
}

EighResult eigh_smallest(const Eigen::MatrixXcd& a, int count) {
  check_square(a);
  const int n = static_cast<int>(a.rows());
  if (count < 1 || count > n) throw NumericError("eigh_smallest: bad count");
  return zheevr(a, 'V', 'I', 1, count, 0.0, 0.0);
}

EighResult eigh_below(const Eigen::MatrixXcd& a, double ceiling) {
  return zheevr(a, 'V', 'V', 0, 0, -1e300, ceiling);
}

}  // namespace topowave::linalg
