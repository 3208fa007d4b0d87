#pragma once

#include <cassert>
#include <cmath>
#include <numeric>
#include <vector>

namespace defaff::nn {

// Dense row-major tensor. Compute happens in double; checkpoints quantize to
// 32-bit floats on disk.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;

    static Tensor zeros(std::vector<int> shape) {
        Tensor t;
        t.shape = std::move(shape);
        t.v.assign(t.count(), 0.0);
        return t;
    }

    std::size_t count() const {
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        return n;
    }

    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    void zero() { std::fill(v.begin(), v.end(), 0.0); }

    bool finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }

    double* data() { return v.data(); }
    const double* data() const { return v.data(); }
};

}  // namespace defaff::nn
