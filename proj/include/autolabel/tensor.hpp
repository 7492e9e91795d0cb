#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "autolabel/error.hpp"

namespace autolabel {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

/// Dense row-major tensor. Value count always equals the product of the shape.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() = default;
    explicit BasicTensor(Shape shape, T fill = T{})
        : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
    BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != shape_size(shape_))
            throw InvalidInput("tensor data size " + std::to_string(data_.size()) +
                               " does not match shape " + shape_string(shape_));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    std::vector<T>& storage() noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    /// Same values, new shape of equal size.
    void reshape(Shape s) {
        if (shape_size(s) != data_.size())
            throw InvalidInput("cannot reshape " + shape_string(shape_) + " to " + shape_string(s));
        shape_ = std::move(s);
    }
    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    template <typename U>
    BasicTensor<U> cast() const {
        return BasicTensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
    }

    friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

private:
    Shape shape_;
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

/// An image is a C x H x W tensor with intensities in [0, 1].
using Image = Tensor;

inline std::size_t channels(const Image& im) { return im.dim(0); }
inline std::size_t height(const Image& im) { return im.dim(1); }
inline std::size_t width(const Image& im) { return im.dim(2); }

} // namespace autolabel
