#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace dvconv {

// Dense row-major tensor of doubles with an optional same-shape gradient
// buffer. Shapes are small at desk scale; no striding tricks.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;
    std::vector<double> grad;  // empty unless alloc_grad() was called

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        v.assign(static_cast<size_t>(count(shape)), 0.0);
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

    static int64_t count(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) {
            if (d < 0) throw std::invalid_argument("negative tensor dimension");
            n *= d;
        }
        return n;
    }

    int64_t size() const { return static_cast<int64_t>(v.size()); }

    int dim(int i) const { return shape.at(static_cast<size_t>(i)); }

    // 2D helpers (the common case: [rows, cols])
    double& at(int i, int j) { return v[static_cast<size_t>(i) * shape[1] + j]; }
    double at(int i, int j) const { return v[static_cast<size_t>(i) * shape[1] + j]; }

    void alloc_grad() { grad.assign(v.size(), 0.0); }
    void zero_grad() {
        if (grad.size() != v.size()) grad.assign(v.size(), 0.0);
        else std::fill(grad.begin(), grad.end(), 0.0);
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

inline void check_shape(const Tensor& t, const std::vector<int>& want, const std::string& what) {
    if (t.shape != want) throw std::invalid_argument("shape mismatch: " + what);
}

}  // namespace dvconv
