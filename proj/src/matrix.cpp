#include "bpu/matrix.hpp"

#include <cmath>

namespace bpu {

Matrix::Matrix(int r, int c, double fill) : rows(r), cols(c) {
    require(r > 0 && c > 0, "Matrix dimensions must be positive, got " + std::to_string(r) + "x" + std::to_string(c));
    values.assign(static_cast<size_t>(r) * c, fill);
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows_init) {
    const int r = static_cast<int>(rows_init.size());
    require(r > 0, "from_rows: empty initializer");
    const int c = static_cast<int>(rows_init.begin()->size());
    Matrix m(r, c);
    int i = 0;
    for (const auto& row : rows_init) {
        require(static_cast<int>(row.size()) == c, "from_rows: ragged rows");
        int j = 0;
        for (double v : row) m.at(i, j++) = v;
        ++i;
    }
    return m;
}

std::string Matrix::shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

bool Matrix::all_finite() const {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    require(a.cols == b.rows,
            "matmul: dimension mismatch " + a.shape_str() + " * " + b.shape_str());
    Matrix out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        for (int k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            const auto brow = b.row(k);
            auto orow = out.row(i);
            for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    require(a.cols == b.cols,
            "matmul_nt: dimension mismatch " + a.shape_str() + " * " + b.shape_str() + "^T");
    Matrix out(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.rows; ++j) out.at(i, j) = dot(a.row(i), b.row(j));
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    require(a.rows == b.rows,
            "matmul_tn: dimension mismatch " + a.shape_str() + "^T * " + b.shape_str());
    Matrix out(a.cols, b.cols);
    for (int k = 0; k < a.rows; ++k) {
        const auto arow = a.row(k);
        const auto brow = b.row(k);
        for (int i = 0; i < a.cols; ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            auto orow = out.row(i);
            for (int j = 0; j < b.cols; ++j) orow[j] += aki * brow[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) out.at(j, i) = m.at(i, j);
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require(a.same_shape(b), "add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Matrix out = a;
    for (size_t i = 0; i < out.values.size(); ++i) out.values[i] += b.values[i];
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require(a.same_shape(b), "sub: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Matrix out = a;
    for (size_t i = 0; i < out.values.size(); ++i) out.values[i] -= b.values[i];
    return out;
}

Matrix scale(const Matrix& m, double s) {
    Matrix out = m;
    for (double& v : out.values) v *= s;
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require(a.same_shape(b), "hadamard: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Matrix out = a;
    for (size_t i = 0; i < out.values.size(); ++i) out.values[i] *= b.values[i];
    return out;
}

std::vector<double> matvec(const Matrix& m, std::span<const double> x) {
    require(static_cast<size_t>(m.cols) == x.size(),
            "matvec: dimension mismatch " + m.shape_str() + " * vec[" + std::to_string(x.size()) + "]");
    std::vector<double> y(static_cast<size_t>(m.rows));
    for (int i = 0; i < m.rows; ++i) y[static_cast<size_t>(i)] = dot(m.row(i), x);
    return y;
}

std::vector<double> matvec_t(const Matrix& m, std::span<const double> x) {
    require(static_cast<size_t>(m.rows) == x.size(),
            "matvec_t: dimension mismatch " + m.shape_str() + "^T * vec[" + std::to_string(x.size()) + "]");
    std::vector<double> y(static_cast<size_t>(m.cols), 0.0);
    for (int i = 0; i < m.rows; ++i) axpy(x[static_cast<size_t>(i)], m.row(i), y);
    return y;
}

double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (double v : m.values) s += v * v;
    return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> v) {
    return std::sqrt(dot(v, v));
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    for (size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace bpu
