#pragma once

#include <Eigen/Sparse>

#include <cmath>
#include <string>
#include <vector>

#include "torsilab/errors.hpp"

namespace torsilab {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct CgResult {
  int iterations = 0;
  double relative_residual = 0.0;  // ||b - A x|| / ||b||, recomputed at exit
  bool converged = false;
  std::vector<double> history;     // recursive relative residual per iteration
};

/// Jacobi-preconditioned conjugate gradient for SPD A, starting from x.
/// Stops once the true relative residual is <= tol or after max_iter steps.
inline CgResult pcg(const SparseMatrix& A, const Vector& b, Vector& x, double tol, int max_iter) {
  CgResult res;
  const double bnorm = b.norm();
  if (x.size() != b.size()) x = Vector::Zero(b.size());
  if (bnorm == 0.0) {
    x.setZero();
    res.converged = true;
    return res;
  }
  const Vector inv_diag = A.diagonal().cwiseInverse();
  Vector r = b - A * x;
  // Restart from the true residual whenever the recursive one claims
  // convergence but the recomputed residual does not.
  while (true) {
    Vector z = inv_diag.cwiseProduct(r);
    Vector p = z;
    double rz = r.dot(z);
    double rel = r.norm() / bnorm;
    Vector q(b.size());
    while (rel > tol && res.iterations < max_iter) {
      q.noalias() = A * p;
      const double alpha = rz / p.dot(q);
      x.noalias() += alpha * p;
      r.noalias() -= alpha * q;
      z = inv_diag.cwiseProduct(r);
      const double rz_new = r.dot(z);
      p = z + (rz_new / rz) * p;
      rz = rz_new;
      rel = r.norm() / bnorm;
      res.history.push_back(rel);
      ++res.iterations;
    }
    r = b - A * x;
    res.relative_residual = r.norm() / bnorm;
    if (res.relative_residual <= tol) {
      res.converged = true;
      return res;
    }
    if (res.iterations >= max_iter) return res;
  }
}

}  // namespace torsilab
