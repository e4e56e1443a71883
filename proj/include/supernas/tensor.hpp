// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "supernas/common.hpp"

namespace supernas {

/// Dense row-major tensor of 64-bit floats. Shapes are fixed at construction;
/// an empty shape list denotes a scalar (numel() == 1).
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar(double value);

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty() && shape_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // Index helpers for the common ranks.
    int64_t index2(int a, int b) const { return int64_t(a) * dim(1) + b; }
    int64_t index4(int a, int b, int c, int d) const {
        return ((int64_t(a) * dim(1) + b) * dim(2) + c) * dim(3) + d;
    }
    double& at2(int a, int b) { return data_[size_t(index2(a, b))]; }
    double at2(int a, int b) const { return data_[size_t(index2(a, b))]; }
    double& at4(int a, int b, int c, int d) { return data_[size_t(index4(a, b, c, d))]; }
    double at4(int a, int b, int c, int d) const { return data_[size_t(index4(a, b, c, d))]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    void fill(double v);
    void zero() { fill(0.0); }

  private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

/// A trainable tensor: value plus an accumulating gradient buffer.
struct Parameter {
    Tensor value;
    Tensor grad;

    Parameter() = default;
    explicit Parameter(Tensor v) : value(std::move(v)), grad(value.shape()) {}

    bool present() const { return value.numel() > 0; }
};

}  // namespace supernas
