#ifndef ADFRL_NN_TENSOR_HPP
#define ADFRL_NN_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "adfrl/errors.hpp"

namespace adfrl::nn {

// Row-major dense matrix of 64-bit reals. The only tensor rank the
// library needs; sequences are std::vector<Vec>.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

using Vec = std::vector<double>;

// y = W x
inline Vec matvec(const Matrix& w, const Vec& x) {
    if (static_cast<int>(x.size()) != w.cols)
        throw ShapeError("nn: matvec expects input of length " + std::to_string(w.cols) +
                         ", got " + std::to_string(x.size()));
    Vec y(w.rows, 0.0);
    for (int r = 0; r < w.rows; ++r) {
        double acc = 0.0;
        const double* row = w.data.data() + static_cast<std::size_t>(r) * w.cols;
        for (int c = 0; c < w.cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
    return y;
}

// y = W^T x
inline Vec matvec_transposed(const Matrix& w, const Vec& x) {
    if (static_cast<int>(x.size()) != w.rows)
        throw ShapeError("nn: matvec_transposed expects input of length " +
                         std::to_string(w.rows) + ", got " + std::to_string(x.size()));
    Vec y(w.cols, 0.0);
    for (int r = 0; r < w.rows; ++r) {
        const double xr = x[r];
        const double* row = w.data.data() + static_cast<std::size_t>(r) * w.cols;
        for (int c = 0; c < w.cols; ++c) y[c] += row[c] * xr;
    }
    return y;
}

// acc += a b^T
inline void add_outer(Matrix& acc, const Vec& a, const Vec& b) {
    if (static_cast<int>(a.size()) != acc.rows || static_cast<int>(b.size()) != acc.cols)
        throw ShapeError("nn: outer-product shape mismatch");
    for (int r = 0; r < acc.rows; ++r) {
        double* row = acc.data.data() + static_cast<std::size_t>(r) * acc.cols;
        const double ar = a[r];
        for (int c = 0; c < acc.cols; ++c) row[c] += ar * b[c];
    }
}

inline void add_into(Vec& acc, const Vec& v) {
    if (acc.size() != v.size()) throw ShapeError("nn: vector accumulate shape mismatch");
    for (std::size_t i = 0; i < v.size(); ++i) acc[i] += v[i];
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

} // namespace adfrl::nn

#endif
