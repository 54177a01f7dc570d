#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "adasti/common.hpp"

namespace adasti {

using Shape = std::vector<Index>;

inline Index numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), Index{1}, std::multiplies<>());
}

std::string shape_str(const Shape& s);

/// Dense row-major array of doubles.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(static_cast<std::size_t>(numel(shape_)), fill) {}
    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        require(static_cast<Index>(data_.size()) == numel(shape_), "Tensor: data size does not match shape");
    }

    const Shape& shape() const noexcept { return shape_; }
    Index dim(Index i) const { return shape_.at(static_cast<std::size_t>(i < 0 ? rank() + i : i)); }
    Index rank() const noexcept { return static_cast<Index>(shape_.size()); }
    Index size() const noexcept { return static_cast<Index>(data_.size()); }
    bool empty() const noexcept { return data_.empty(); }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<double> span() noexcept { return data_; }
    std::span<const double> span() const noexcept { return data_; }
    std::vector<double>& vec() noexcept { return data_; }
    const std::vector<double>& vec() const noexcept { return data_; }

    double& operator[](Index i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](Index i) const { return data_[static_cast<std::size_t>(i)]; }

    double& at(Index i, Index j) { return data_[static_cast<std::size_t>(i * shape_[1] + j)]; }
    double at(Index i, Index j) const { return data_[static_cast<std::size_t>(i * shape_[1] + j)]; }
    double& at(Index i, Index j, Index k) {
        return data_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }
    double at(Index i, Index j, Index k) const {
        return data_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }

    Tensor reshaped(Shape s) const {
        require(numel(s) == size(), "reshape: element count mismatch " + shape_str(shape_) + " -> " + shape_str(s));
        return Tensor(std::move(s), data_);
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    void add_(const Tensor& o);
    void scale_(double s);
    double sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }
    double norm() const;
    bool all_finite() const;

    bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

private:
    Shape shape_;
    std::vector<double> data_;
};

}  // namespace adasti
