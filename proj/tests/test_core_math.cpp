#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bpu/linalg.hpp"
#include "bpu/matrix.hpp"
#include "bpu/rng.hpp"

using namespace bpu;

namespace {

// Independent eigen-route oracle: cyclic Jacobi EIGEN decomposition of the
// symmetric matrix m^T m; singular values are the square roots of its
// eigenvalues. Deliberately a different algorithm (two-sided, on the Gram
// matrix) from the one-sided SVD it checks.
std::vector<double> singular_values_via_gram_eigen(const Matrix& m) {
    Matrix s = matmul_tn(m, m);  // m^T m, n x n symmetric
    const int n = s.rows;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n - 1; ++p)
            for (int q = p + 1; q < n; ++q) off += s.at(p, q) * s.at(p, q);
        if (off < 1e-26) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (s.at(p, q) == 0.0) continue;
                const double theta = 0.5 * std::atan2(2.0 * s.at(p, q), s.at(q, q) - s.at(p, p));
                const double c = std::cos(theta), si = std::sin(theta);
                for (int i = 0; i < n; ++i) {
                    const double ip = s.at(i, p), iq = s.at(i, q);
                    s.at(i, p) = c * ip - si * iq;
                    s.at(i, q) = si * ip + c * iq;
                }
                for (int j = 0; j < n; ++j) {
                    const double pj = s.at(p, j), qj = s.at(q, j);
                    s.at(p, j) = c * pj - si * qj;
                    s.at(q, j) = si * pj + c * qj;
                }
            }
        }
    }
    std::vector<double> ev(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) ev[static_cast<size_t>(i)] = std::sqrt(std::max(0.0, s.at(i, i)));
    std::sort(ev.begin(), ev.end(), std::greater<>());
    return ev;
}

Matrix reconstruct(const SvdResult& r) {
    Matrix us = r.u;
    for (int i = 0; i < us.rows; ++i)
        for (int j = 0; j < us.cols; ++j) us.at(i, j) *= r.s[static_cast<size_t>(j)];
    return matmul_nt(us, r.v);
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double d = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) d = std::max(d, std::abs(a.values[i] - b.values[i]));
    return d;
}

}  // namespace

TEST_CASE("matmul identity, zero, and hand cases") {
    RngStream stream(11);
    const Matrix m = rng_gaussian_matrix(stream, 3, 5, 0.0, 1.0);
    CHECK(max_abs_diff(matmul(Matrix::identity(3), m), m) == 0.0);

    const Matrix z(2, 2, 0.0);
    const Matrix any = rng_gaussian_matrix(stream, 2, 4, 0.0, 1.0);
    const Matrix zm = matmul(z, any);
    for (double v : zm.values) CHECK(v == 0.0);

    const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
    const Matrix b = Matrix::from_rows({{5}, {6}});
    const Matrix c = matmul(a, b);
    CHECK(c.at(0, 0) == doctest::Approx(17.0));
    CHECK(c.at(1, 0) == doctest::Approx(39.0));

    CHECK_THROWS_AS(matmul(a, Matrix(3, 2, 1.0)), ContractViolation);
    try {
        matmul(a, Matrix(3, 2, 1.0));
    } catch (const ContractViolation& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2x2") != std::string::npos);  // both shapes reported
        CHECK(msg.find("3x2") != std::string::npos);
    }
}

TEST_CASE("frobenius_norm basics") {
    CHECK(frobenius_norm(Matrix(4, 7, 0.0)) == 0.0);
    CHECK(frobenius_norm(Matrix::identity(9)) == doctest::Approx(3.0));
    CHECK(frobenius_norm(Matrix::from_rows({{3, 4}})) == doctest::Approx(5.0));
}

TEST_CASE("splitmix64 Box-Muller golden values") {
    // Frozen from the reference generator implementation.
    RngStream s(42);
    CHECK(s.next_u64() == 0xbdd732262feb6e95ULL);

    RngStream s2(42);
    CHECK(s2.next_unit() == doctest::Approx(0.7415648787718234).epsilon(1e-15));

    RngStream s3(42);
    const double expected[6] = {0.41471975043153003, 0.65268122215194302, -0.89188621362775733,
                                1.3268335628141055,  1.7295930879374031,  -1.8834167889028144};
    for (double e : expected) CHECK(s3.next_gaussian() == doctest::Approx(e).epsilon(1e-14));
    CHECK(s3.draws() == 6);
}

TEST_CASE("rng_gaussian_matrix golden and degenerate cases") {
    RngStream s(7);
    const Matrix m = rng_gaussian_matrix(s, 2, 2, 0.0, 1.0);
    CHECK(m.at(0, 0) == doctest::Approx(1.3649922974572279).epsilon(1e-14));
    CHECK(m.at(0, 1) == doctest::Approx(0.14452122126941588).epsilon(1e-14));
    CHECK(m.at(1, 0) == doctest::Approx(-0.39652397525381772).epsilon(1e-14));
    CHECK(m.at(1, 1) == doctest::Approx(-0.22759631143286668).epsilon(1e-14));

    RngStream sc(99);
    const Matrix c = rng_gaussian_matrix(sc, 2, 2, 2.0, 0.0);
    for (double v : c.values) CHECK(v == 2.0);
}

TEST_CASE("rng statistical sanity at 1e5 draws") {
    RngStream s(123);
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = s.next_gaussian();
        sum += g;
        sq += g * g;
    }
    const double mean = sum / n;
    const double stddev = std::sqrt(sq / n - mean * mean);
    CHECK(std::abs(mean) < 0.02);
    CHECK(stddev > 0.98);
    CHECK(stddev < 1.02);
}

TEST_CASE("identical seeds give bit-identical matrices") {
    RngStream a(31337), b(31337);
    const Matrix ma = rng_gaussian_matrix(a, 7, 5, 0.5, 2.0);
    const Matrix mb = rng_gaussian_matrix(b, 7, 5, 0.5, 2.0);
    for (size_t i = 0; i < ma.values.size(); ++i) CHECK(ma.values[i] == mb.values[i]);
}

TEST_CASE("svd_small diagonal and identity") {
    const SvdResult r = svd_small(Matrix::from_rows({{2, 0}, {0, -5}}));
    CHECK(r.s[0] == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(r.s[1] == doctest::Approx(2.0).epsilon(1e-12));

    const SvdResult ri = svd_small(Matrix::identity(6));
    for (double s : ri.s) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("svd_small vs gram-eigen oracle on a seeded 6x3 matrix") {
    RngStream stream(2024);
    const Matrix m = rng_gaussian_matrix(stream, 6, 3, 0.0, 3.0);
    const SvdResult r = svd_small(m);
    CHECK(max_abs_diff(reconstruct(r), m) < 1e-10);
    const auto oracle = singular_values_via_gram_eigen(m);
    for (size_t i = 0; i < oracle.size(); ++i)
        CHECK(r.s[i] == doctest::Approx(oracle[i]).epsilon(1e-9));
}

TEST_CASE("svd_small reconstruction over 200 seeded matrices") {
    RngStream stream(5150);
    for (int trial = 0; trial < 200; ++trial) {
        const int rows = 1 + stream.next_index(8);
        const int cols = 1 + stream.next_index(8);
        const Matrix m = rng_gaussian_matrix(stream, rows, cols, 0.0, 10.0 / 3.0);
        const SvdResult r = svd_small(m);
        CHECK(max_abs_diff(reconstruct(r), m) < 1e-10);
        for (size_t i = 1; i < r.s.size(); ++i) CHECK(r.s[i] <= r.s[i - 1]);
        for (double s : r.s) CHECK(s >= 0.0);
    }
}

TEST_CASE("svd_small large-entry reconstruction stays within 1e-10") {
    RngStream stream(8080);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix m = rng_gaussian_matrix(stream, 6, 4, 0.0, 500.0);
        const SvdResult r = svd_small(m);
        // Frobenius reconstruction error, matching the stated invariant for
        // entries in the [-1e3, 1e3] range.
        CHECK(frobenius_norm(sub(reconstruct(r), m)) < 1e-10);
    }
}

TEST_CASE("svd_small rejects over-cap matrices, handles rank deficiency") {
    Matrix wide(2, 300, 1.0);
    CHECK_NOTHROW(svd_small(wide));  // min dimension 2 is inside the cap
    Matrix big(300, 300, 1.0);
    CHECK_THROWS_AS(svd_small(big), ContractViolation);

    // Rank-1 with a zero singular value: orthonormal completion still valid.
    const Matrix r1 = Matrix::from_rows({{1, 2}, {2, 4}, {3, 6}});
    const SvdResult r = svd_small(r1);
    CHECK(r.s[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(max_abs_diff(reconstruct(r), r1) < 1e-10);
    double uu = 0.0;
    for (int i = 0; i < 3; ++i) uu += r.u.at(i, 0) * r.u.at(i, 1);
    CHECK(std::abs(uu) < 1e-10);  // completed column orthogonal to the first
}

TEST_CASE("operator_norm identity, diagonal, and SVD agreement") {
    CHECK(operator_norm(Matrix::identity(5)).value == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(operator_norm(Matrix::from_rows({{3, 0}, {0, 1}})).value == doctest::Approx(3.0).epsilon(1e-10));

    RngStream stream(4242);
    const Matrix m = rng_gaussian_matrix(stream, 5, 4, 0.0, 1.0);
    const OperatorNormResult r = operator_norm(m, 1e-13);
    CHECK(r.converged);
    CHECK(r.value == doctest::Approx(svd_small(m).s[0]).epsilon(1e-8));
}

TEST_CASE("operator_norm equals svd s[0] on a 200-matrix corpus") {
    RngStream stream(77);
    for (int trial = 0; trial < 200; ++trial) {
        const int rows = 1 + stream.next_index(8);
        const int cols = 1 + stream.next_index(8);
        const Matrix m = rng_gaussian_matrix(stream, rows, cols, 0.0, 2.0);
        const OperatorNormResult r = operator_norm(m, 1e-13);
        const double s0 = svd_small(m).s[0];
        CHECK(std::abs(r.value - s0) < 1e-8 * (1.0 + s0));
    }
}

TEST_CASE("submultiplicativity: fro(AB) <= op(A) * fro(B)") {
    RngStream stream(31);
    for (int trial = 0; trial < 200; ++trial) {
        const int m = 1 + stream.next_index(6);
        const int k = 1 + stream.next_index(6);
        const int n = 1 + stream.next_index(6);
        const Matrix a = rng_gaussian_matrix(stream, m, k, 0.0, 1.5);
        const Matrix b = rng_gaussian_matrix(stream, k, n, 0.0, 1.5);
        const double lhs = frobenius_norm(matmul(a, b));
        const double rhs = operator_norm(a, 1e-12).value * frobenius_norm(b);
        CHECK(lhs <= rhs + 1e-9);
    }
}

TEST_CASE("project_onto fixed point, orthogonality, idempotence") {
    const std::vector<double> u{1.0, 0.0};
    const std::vector<double> v{1.0, 1.0};
    const auto p = project_onto(v, u);
    CHECK(p[0] == doctest::Approx(1.0));
    CHECK(p[1] == doctest::Approx(0.0));

    const auto fixed = project_onto(u, u);
    CHECK(fixed[0] == doctest::Approx(1.0));
    CHECK(fixed[1] == doctest::Approx(0.0));

    const std::vector<double> perp{0.0, 3.0};
    const auto z = project_onto(perp, u);
    CHECK(z[0] == 0.0);
    CHECK(z[1] == 0.0);

    RngStream stream(55);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a(4), b(4);
        for (auto& x : a) x = stream.next_gaussian();
        for (auto& x : b) x = stream.next_gaussian();
        const auto once = project_onto(a, b);
        const auto twice = project_onto(once, b);
        for (size_t i = 0; i < once.size(); ++i) CHECK(std::abs(once[i] - twice[i]) < 1e-12);
    }

    const std::vector<double> zero{0.0, 0.0};
    CHECK_THROWS_AS(project_onto(v, zero), ContractViolation);
}
