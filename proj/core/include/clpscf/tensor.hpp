#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace clpscf {

// Dense row-major tensor of doubles, rank 1..4. Heavier machinery
// (views, broadcasting) is intentionally absent; layers know their
// shapes and index explicitly.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        int64_t n = 1;
        for (int d : shape_) {
            if (d <= 0) throw std::invalid_argument("Tensor: dims must be positive");
            n *= d;
        }
        data_.assign(static_cast<size_t>(n), 0.0);
        init_strides();
    }

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const std::vector<int>& shape() const { return shape_; }
    int dim(size_t i) const { return shape_.at(i); }
    int rank() const { return static_cast<int>(shape_.size()); }
    size_t numel() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& flat() { return data_; }
    const std::vector<double>& flat() const { return data_; }

    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    double& at(int a) { return data_[static_cast<size_t>(a)]; }
    double& at(int a, int b) { return data_[idx(a, b)]; }
    double& at(int a, int b, int c) { return data_[idx(a, b, c)]; }
    double& at(int a, int b, int c, int d) { return data_[idx(a, b, c, d)]; }
    double at(int a) const { return data_[static_cast<size_t>(a)]; }
    double at(int a, int b) const { return data_[idx(a, b)]; }
    double at(int a, int b, int c) const { return data_[idx(a, b, c)]; }
    double at(int a, int b, int c, int d) const { return data_[idx(a, b, c, d)]; }

    size_t idx(int a, int b) const {
        return static_cast<size_t>(a) * strides_[0] + static_cast<size_t>(b);
    }
    size_t idx(int a, int b, int c) const {
        return static_cast<size_t>(a) * strides_[0] + static_cast<size_t>(b) * strides_[1] +
               static_cast<size_t>(c);
    }
    size_t idx(int a, int b, int c, int d) const {
        return static_cast<size_t>(a) * strides_[0] + static_cast<size_t>(b) * strides_[1] +
               static_cast<size_t>(c) * strides_[2] + static_cast<size_t>(d);
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    std::string shape_str() const {
        std::string s = "(";
        for (size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + ")";
    }

private:
    void init_strides() {
        strides_.assign(shape_.size(), 1);
        for (int i = static_cast<int>(shape_.size()) - 2; i >= 0; --i) {
            strides_[static_cast<size_t>(i)] =
                strides_[static_cast<size_t>(i) + 1] *
                static_cast<size_t>(shape_[static_cast<size_t>(i) + 1]);
        }
        // strides_[k] as used by idx() is the stride of axis k.
    }

    std::vector<int> shape_;
    std::vector<size_t> strides_;
    std::vector<double> data_;
};

}  // namespace clpscf
