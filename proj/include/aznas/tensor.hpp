#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "aznas/errors.hpp"

namespace aznas {

// Dense row-major (batch, channels, height, width) activation array, 64-bit.
struct Tensor4 {
    int b = 0, c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor4() = default;
    Tensor4(int b_, int c_, int h_, int w_)
        : b(b_), c(c_), h(h_), w(w_),
          data(static_cast<std::size_t>(b_) * c_ * h_ * w_, 0.0) {
        if (b_ < 0 || c_ < 0 || h_ < 0 || w_ < 0)
            throw ArgumentError("Tensor4: negative dimension");
    }

    std::size_t size() const { return data.size(); }

    std::size_t index(int bi, int ci, int y, int x) const {
        return ((static_cast<std::size_t>(bi) * c + ci) * h + y) * w + x;
    }
    double& at(int bi, int ci, int y, int x) { return data[index(bi, ci, y, x)]; }
    double at(int bi, int ci, int y, int x) const { return data[index(bi, ci, y, x)]; }

    bool same_shape(const Tensor4& o) const {
        return b == o.b && c == o.c && h == o.h && w == o.w;
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// Small dense row-major matrix used for Jacobian estimates and covariances.
struct Matrix {
    int rows = 0, cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

}  // namespace aznas
