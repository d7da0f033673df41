#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bpu/errors.hpp"

namespace bpu {

// Dense row-major float64 matrix. The universal numeric carrier for weights,
// activations and gradients; length(values) == rows*cols at all times.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0);

    static Matrix identity(int n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows_init);

    double& at(int i, int j) { return values[static_cast<size_t>(i) * cols + j]; }
    double at(int i, int j) const { return values[static_cast<size_t>(i) * cols + j]; }

    std::span<double> row(int i) { return {values.data() + static_cast<size_t>(i) * cols, static_cast<size_t>(cols)}; }
    std::span<const double> row(int i) const {
        return {values.data() + static_cast<size_t>(i) * cols, static_cast<size_t>(cols)};
    }

    size_t size() const { return values.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    std::string shape_str() const;
    bool all_finite() const;
};

Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T and a^T * b; used where materializing the transpose is wasteful.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double s);
Matrix hadamard(const Matrix& a, const Matrix& b);

// y = M x for a column vector x of length M.cols.
std::vector<double> matvec(const Matrix& m, std::span<const double> x);
// y = M^T x for x of length M.rows.
std::vector<double> matvec_t(const Matrix& m, std::span<const double> x);

double frobenius_norm(const Matrix& m);

// Vector helpers (float64 sequences are used as vectors throughout).
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
void axpy(double alpha, std::span<const double> x, std::span<double> y);  // y += alpha*x

}  // namespace bpu
