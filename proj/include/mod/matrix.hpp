#ifndef MOD_MATRIX_HPP
#define MOD_MATRIX_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mod/common.hpp"

namespace mod {

// Dense row-major matrix. Vectors are 1xN matrices by convention.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<real> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, real fill = real{0}) : rows(r), cols(c), data(r * c, fill) {}

    static Matrix row_vector(std::vector<real> values) {
        Matrix m;
        m.rows = 1;
        m.cols = values.size();
        m.data = std::move(values);
        return m;
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = real{1};
        return m;
    }

    real& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    real operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    std::string shape_str() const {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }

    bool all_finite() const {
        for (real v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(real v) { std::fill(data.begin(), data.end(), v); }

    Matrix& operator+=(const Matrix& o) {
        if (!same_shape(o)) throw ShapeError("add " + shape_str() + " vs " + o.shape_str());
        for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
        return *this;
    }

    Matrix& operator*=(real s) {
        for (real& v : data) v *= s;
        return *this;
    }

    real squared_norm() const {
        real s = 0;
        for (real v : data) s += v * v;
        return s;
    }
};

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace mod

#endif  // MOD_MATRIX_HPP
