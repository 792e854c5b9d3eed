#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cblend/error.hpp"

namespace cblend {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(std::span<const std::size_t> shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_string(std::span<const std::size_t> shape);

/// Dense row-major array. A rank-0 tensor holds exactly one value.
template <class T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() : data_(1, T{}) {}

    explicit BasicTensor(Shape shape, T fill = T{})
        : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

    BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != element_count(shape_)) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string(shape_));
        }
    }

    static BasicTensor scalar(T value) { return BasicTensor(Shape{}, std::vector<T>{value}); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    const std::vector<T>& values() const noexcept { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    /// Element (r, c) of a rank-2 tensor.
    T& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    const T& at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    /// Row r of a rank-2 tensor.
    std::span<T> row(std::size_t r) { return std::span<T>(data_).subspan(r * shape_[1], shape_[1]); }
    std::span<const T> row(std::size_t r) const {
        return std::span<const T>(data_).subspan(r * shape_[1], shape_[1]);
    }

    T item() const {
        if (data_.size() != 1) {
            throw ShapeError("item() on tensor of shape " + shape_string(shape_));
        }
        return data_[0];
    }

    BasicTensor reshaped(Shape shape) const { return BasicTensor(std::move(shape), data_); }

    template <class U>
    BasicTensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return BasicTensor<U>(shape_, std::move(out));
    }

    friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

private:
    Shape shape_;
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Little-endian tensor encoding: u64 rank, u64 per dimension, f32 per value.
std::vector<std::uint8_t> serialize_tensor(const Tensor& tensor);

/// Decodes one tensor starting at `offset`, advancing it past the record.
/// Throws TruncationError with the byte offset when the input ends early.
Tensor deserialize_tensor(std::span<const std::uint8_t> bytes, std::size_t& offset);

/// Decodes a buffer that holds exactly one tensor.
Tensor deserialize_tensor(std::span<const std::uint8_t> bytes);

} // namespace cblend
