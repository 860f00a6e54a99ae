#pragma once

#include <cmath>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "hoi/errors.hpp"

namespace hoi {

// Dense row-major tensor of doubles. Rank is 1, 2 or 3; rank-3 tensors use
// {channels, height, width} layout for the small CNNs.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, double fill = 0.0) : shape_(std::move(shape)) {
        int n = 1;
        for (int d : shape_) {
            if (d <= 0) throw ShapeError("tensor dimension must be positive");
            n *= d;
        }
        data_.assign(static_cast<size_t>(n), fill);
    }

    static Tensor matrix(int rows, int cols, double fill = 0.0) { return Tensor({rows, cols}, fill); }

    static Tensor row_vector(const std::vector<double>& values) {
        Tensor t({1, static_cast<int>(values.size())});
        t.data_ = values;
        return t;
    }

    int rank() const { return static_cast<int>(shape_.size()); }
    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }

    int rows() const { return require_rank2().shape_[0]; }
    int cols() const { return require_rank2().shape_[1]; }

    int size() const { return static_cast<int>(data_.size()); }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& at(int r, int c) { return data_[static_cast<size_t>(r) * shape_[1] + c]; }
    double at(int r, int c) const { return data_[static_cast<size_t>(r) * shape_[1] + c]; }

    // {C,H,W} indexing.
    double& at3(int c, int h, int w) {
        return data_[(static_cast<size_t>(c) * shape_[1] + h) * shape_[2] + w];
    }
    double at3(int c, int h, int w) const {
        return data_[(static_cast<size_t>(c) * shape_[1] + h) * shape_[2] + w];
    }

    double& flat(int i) { return data_[static_cast<size_t>(i)]; }
    double flat(int i) const { return data_[static_cast<size_t>(i)]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    std::string shape_str() const {
        std::string s = "(";
        for (size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + ")";
    }

private:
    const Tensor& require_rank2() const {
        if (shape_.size() != 2) throw ShapeError("expected rank-2 tensor, got " + shape_str());
        return *this;
    }

    std::vector<int> shape_;
    std::vector<double> data_;
};

}  // namespace hoi
