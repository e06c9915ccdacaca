#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsrnet {

// Dense row-major tensor of doubles. Shapes are small (rank <= 4), data is
// contiguous; layers index into data() directly in their hot loops.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(numel(shape_), 0.0);
    }

    Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

    static std::size_t numel(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // 2D / 3D / 4D accessors, row-major.
    double& at(int i, int j) {
        return data_[static_cast<std::size_t>(i) * shape_[1] + j];
    }
    const double& at(int i, int j) const {
        return data_[static_cast<std::size_t>(i) * shape_[1] + j];
    }
    double& at(int i, int j, int k) {
        return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
    }
    const double& at(int i, int j, int k) const {
        return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
    }
    double& at(int i, int j, int k, int l) {
        return data_[((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }
    const double& at(int i, int j, int k, int l) const {
        return data_[((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(0.0); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    // Reinterprets the data under a new shape with identical element count.
    Tensor reshaped(std::vector<int> shape) const {
        if (numel(shape) != size()) throw std::invalid_argument("Tensor::reshaped: size mismatch");
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = data_;
        return t;
    }

    static std::string shape_str(const std::vector<int>& s) {
        std::string out = "[";
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) out += "x";
            out += std::to_string(s[i]);
        }
        return out + "]";
    }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                    Tensor::shape_str(a.shape()) + " vs " +
                                    Tensor::shape_str(b.shape()));
}

} // namespace tsrnet
