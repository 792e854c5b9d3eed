#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cblend/tensor.hpp"

namespace cblend {

/// The closed set of differentiable operations the denoiser is built from.
enum class Primitive {
    matmul,  // [M,K] x [K,N] -> [M,N]
    add,     // x + y (same shape) or x + bias broadcast over the last axis
    mul,     // elementwise, same shape
    silu,    // x * sigmoid(x)
    film,    // x * (1 + scale) + shift; scale/shift same shape as x or [features]
    concat,  // concatenation of two rank-2 tensors along the last axis
    mse,     // mean((a - b)^2) -> scalar
};

std::string_view primitive_name(Primitive kind);

/// Throws ConfigError for names outside the primitive set.
Primitive parse_primitive(std::string_view name);

/// Forward evaluation without recording. Reductions (matmul, mse) accumulate in double.
template <class T>
BasicTensor<T> apply_primitive(Primitive kind, std::span<const BasicTensor<T>* const> inputs);

template <class T>
BasicTensor<T> apply_primitive(Primitive kind, std::initializer_list<const BasicTensor<T>*> inputs) {
    return apply_primitive<T>(kind, std::span<const BasicTensor<T>* const>(inputs.begin(), inputs.size()));
}

/// Inverse of concat: splits the last axis at `left_width`.
template <class T>
std::pair<BasicTensor<T>, BasicTensor<T>> split_last_axis(const BasicTensor<T>& x, std::size_t left_width);

/**
 * Reverse-mode recording of primitive applications.
 *
 * Values are appended in evaluation order, so node inputs always precede the
 * node. Leaves are either constants or parameters; backward() reports
 * gradients for parameters only.
 */
template <class T>
class Tape {
public:
    using Id = std::size_t;
    using Gradients = std::map<Id, BasicTensor<T>>;

    Id constant(BasicTensor<T> value);
    Id parameter(BasicTensor<T> value);
    Id apply(Primitive kind, std::initializer_list<Id> inputs);

    const BasicTensor<T>& value(Id id) const { return values_.at(id); }
    const std::vector<Id>& parameters() const noexcept { return params_; }
    std::size_t size() const noexcept { return values_.size(); }

    /// Gradients of a scalar loss for every parameter; unreached parameters get zeros.
    /// Throws ContractError when `loss` is not a single value.
    Gradients backward(Id loss) const;

private:
    struct Node {
        Primitive kind;
        std::vector<Id> inputs;
    };

    std::vector<BasicTensor<T>> values_;
    std::vector<std::optional<Node>> nodes_;  // nullopt for leaves
    std::vector<Id> params_;
};

/// Builds a loss on a fresh tape from parameter leaves (ids in the order of `params`).
template <class T>
using LossBuilder = std::function<typename Tape<T>::Id(Tape<T>&, std::span<const typename Tape<T>::Id>)>;

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t worst_param = 0;
    std::size_t worst_index = 0;
    std::size_t coordinates = 0;
};

/**
 * Compares backward() against central differences (f(p+eps) - f(p-eps)) / 2eps
 * on every parameter coordinate. The error per coordinate is
 * |ad - fd| / max(1e-8, |ad| + |fd|).
 *
 * Throws ContractError for eps outside [1e-6, 1e-2] and NumericError when a
 * loss or gradient is non-finite.
 */
template <class T>
GradCheckReport finite_diff_check(const LossBuilder<T>& build, const std::vector<BasicTensor<T>>& params,
                                  double eps);

} // namespace cblend
