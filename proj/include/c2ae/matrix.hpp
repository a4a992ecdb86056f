#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace c2ae {

// Dense row-major matrix of doubles; the one numeric carrier used everywhere.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    bool all_finite() const;

    static Matrix identity(std::size_t n);
};

// exact elementwise equality (shape included)
bool operator==(const Matrix& a, const Matrix& b);
inline bool operator!=(const Matrix& a, const Matrix& b) { return !(a == b); }

Matrix matmul(const Matrix& a, const Matrix& b);     // a * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b^T
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T * b
Matrix transpose(const Matrix& a);

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix& operator+=(Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

// sum of squared entries, accumulated in index order
double sum_squares(const Matrix& a);

// a += c on the diagonal
void add_identity(Matrix& a, double c);

// "%.17g": enough digits to round-trip a double exactly
std::string fmt_g17(double v);

}  // namespace c2ae
