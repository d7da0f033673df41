#pragma once

#include <vector>

#include "bpu/matrix.hpp"

namespace bpu {

// Thin SVD m = u * diag(s) * v^T with k = min(rows, cols) columns in u and v,
// s nonincreasing and nonnegative, u/v columns orthonormal.
struct SvdResult {
    Matrix u;
    std::vector<double> s;
    Matrix v;
};

// One-sided Jacobi SVD with a deterministic cyclic column-pair sweep order.
// Small diagnostic matrices only: min(rows, cols) must be <= 256.
SvdResult svd_small(const Matrix& m);

// Largest singular value by power iteration on m^T m with a seeded start
// vector (internal fixed seed, so the result is deterministic). Convergence:
// successive estimates differ by less than tol.
struct OperatorNormResult {
    double value = 0.0;
    bool converged = false;
    int iters = 0;
};

OperatorNormResult operator_norm(const Matrix& m, double tol = 1e-12, int max_iters = 20000);

// (<v,u>/<u,u>) * u; idempotent. ||u|| = 0 is a contract violation.
std::vector<double> project_onto(std::span<const double> v, std::span<const double> u);

}  // namespace bpu
