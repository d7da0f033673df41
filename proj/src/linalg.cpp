#include "bpu/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bpu/rng.hpp"

namespace bpu {

namespace {

// Columns of work are rotated in place until pairwise orthogonal; rotations
// accumulate into v. Returns false if the sweep cap is hit before convergence
// (practically unreachable for the diagnostic sizes this handles).
void jacobi_orthogonalize(Matrix& work, Matrix& v) {
    const int n = work.cols;
    const int max_sweeps = 100;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (int i = 0; i < work.rows; ++i) {
                    const double wp = work.at(i, p);
                    const double wq = work.at(i, q);
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                if (gamma == 0.0) continue;
                if (std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta)) continue;

                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (int i = 0; i < work.rows; ++i) {
                    const double wp = work.at(i, p);
                    const double wq = work.at(i, q);
                    work.at(i, p) = c * wp - s * wq;
                    work.at(i, q) = s * wp + c * wq;
                }
                for (int i = 0; i < n; ++i) {
                    const double vp = v.at(i, p);
                    const double vq = v.at(i, q);
                    v.at(i, p) = c * vp - s * vq;
                    v.at(i, q) = s * vp + c * vq;
                }
                rotated = true;
            }
        }
        if (!rotated) break;
    }
}

// Fills column j of u with a unit vector orthogonal to columns [0, j) that
// already hold data; used for zero singular values where the Jacobi columns
// vanish. Tries coordinate axes in order, so the completion is deterministic.
void fill_orthonormal_column(Matrix& u, int j) {
    std::vector<double> cand(static_cast<size_t>(u.rows));
    for (int axis = 0; axis < u.rows; ++axis) {
        std::fill(cand.begin(), cand.end(), 0.0);
        cand[static_cast<size_t>(axis)] = 1.0;
        for (int k = 0; k < j; ++k) {
            double d = 0.0;
            for (int i = 0; i < u.rows; ++i) d += cand[static_cast<size_t>(i)] * u.at(i, k);
            for (int i = 0; i < u.rows; ++i) cand[static_cast<size_t>(i)] -= d * u.at(i, k);
        }
        const double nrm = norm2(cand);
        if (nrm > 0.5) {
            for (int i = 0; i < u.rows; ++i) u.at(i, j) = cand[static_cast<size_t>(i)] / nrm;
            return;
        }
    }
    // Full column space already covered; leave a zero column (cannot happen
    // for j < rows, kept as a safe fallback).
}

}  // namespace

SvdResult svd_small(const Matrix& m) {
    require(std::min(m.rows, m.cols) <= 256,
            "svd_small: min dimension exceeds the 256 diagnostic cap, got " + m.shape_str());

    const bool transposed = m.rows < m.cols;
    Matrix work = transposed ? transpose(m) : m;  // rows >= cols
    const int k = work.cols;
    Matrix v = Matrix::identity(k);

    jacobi_orthogonalize(work, v);

    std::vector<double> s(static_cast<size_t>(k));
    Matrix u(work.rows, k);
    for (int j = 0; j < k; ++j) {
        double nrm = 0.0;
        for (int i = 0; i < work.rows; ++i) nrm += work.at(i, j) * work.at(i, j);
        nrm = std::sqrt(nrm);
        s[static_cast<size_t>(j)] = nrm;
    }

    // Sort nonincreasing; stable so equal singular values keep sweep order.
    std::vector<int> order(static_cast<size_t>(k));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return s[static_cast<size_t>(a)] > s[static_cast<size_t>(b)]; });

    Matrix v_sorted(k, k);
    std::vector<double> s_sorted(static_cast<size_t>(k));
    for (int j = 0; j < k; ++j) {
        const int src = order[static_cast<size_t>(j)];
        s_sorted[static_cast<size_t>(j)] = s[static_cast<size_t>(src)];
        for (int i = 0; i < k; ++i) v_sorted.at(i, j) = v.at(i, src);
        if (s[static_cast<size_t>(src)] > 0.0) {
            const double inv = 1.0 / s[static_cast<size_t>(src)];
            for (int i = 0; i < work.rows; ++i) u.at(i, j) = work.at(i, src) * inv;
        }
    }
    for (int j = 0; j < k; ++j)
        if (s_sorted[static_cast<size_t>(j)] == 0.0) fill_orthonormal_column(u, j);

    SvdResult out;
    out.s = std::move(s_sorted);
    if (transposed) {
        out.u = std::move(v_sorted);
        out.v = std::move(u);
    } else {
        out.u = std::move(u);
        out.v = std::move(v_sorted);
    }
    return out;
}

OperatorNormResult operator_norm(const Matrix& m, double tol, int max_iters) {
    require(tol > 0.0, "operator_norm: tol must be positive");
    OperatorNormResult res;

    // Dedicated internal stream so repeated calls are deterministic.
    RngStream stream(0x0B5E55EDB05ULL);
    std::vector<double> v(static_cast<size_t>(m.cols));
    for (double& x : v) x = stream.next_gaussian();
    const double vn = norm2(v);
    if (vn == 0.0) v[0] = 1.0;
    else
        for (double& x : v) x /= vn;

    double prev = -1.0;
    for (int it = 1; it <= max_iters; ++it) {
        std::vector<double> w = matvec(m, v);     // M v
        const double est = norm2(w);              // ||M v|| -> sigma_1
        res.value = est;
        res.iters = it;
        if (est == 0.0) {  // exact zero matrix (or v in the null space of M^T M)
            res.converged = true;
            return res;
        }
        if (prev >= 0.0 && std::abs(est - prev) < tol) {
            res.converged = true;
            return res;
        }
        prev = est;
        std::vector<double> u = matvec_t(m, w);   // M^T M v
        const double un = norm2(u);
        if (un == 0.0) {
            res.converged = true;
            return res;
        }
        for (size_t i = 0; i < v.size(); ++i) v[i] = u[i] / un;
    }
    res.converged = false;  // caller may fall back to svd_small
    return res;
}

std::vector<double> project_onto(std::span<const double> v, std::span<const double> u) {
    require(v.size() == u.size(), "project_onto: dimension mismatch");
    const double uu = dot(u, u);
    require(uu > 0.0, "project_onto: zero direction vector");
    const double c = dot(v, u) / uu;
    std::vector<double> out(u.size());
    for (size_t i = 0; i < u.size(); ++i) out[i] = c * u[i];
    return out;
}

}  // namespace bpu
