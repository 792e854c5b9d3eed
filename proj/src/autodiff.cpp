#include "cblend/autodiff.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace cblend {
namespace {

constexpr std::array<std::pair<Primitive, std::string_view>, 7> kNames{{
    {Primitive::matmul, "matmul"},
    {Primitive::add, "add"},
    {Primitive::mul, "mul"},
    {Primitive::silu, "silu"},
    {Primitive::film, "film"},
    {Primitive::concat, "concat"},
    {Primitive::mse, "mse"},
}};

constexpr std::size_t arity(Primitive kind) {
    switch (kind) {
    case Primitive::silu: return 1;
    case Primitive::film: return 3;
    default: return 2;
    }
}

[[noreturn]] void shape_fail(Primitive kind, const Shape& a, const Shape& b) {
    throw ShapeError(std::string(primitive_name(kind)) + ": incompatible shapes " + shape_string(a) + " and " +
                     shape_string(b));
}

std::size_t last_dim(const Shape& s) { return s.empty() ? 1 : s.back(); }

// Broadcast operand for add/film: same shape as x, or a vector over x's last axis.
bool is_feature_vector(const Shape& x, const Shape& v) { return v.size() == 1 && !x.empty() && v[0] == x.back(); }

template <class T>
void check_broadcast(Primitive kind, const BasicTensor<T>& x, const BasicTensor<T>& v) {
    if (v.shape() != x.shape() && !is_feature_vector(x.shape(), v.shape())) {
        shape_fail(kind, x.shape(), v.shape());
    }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// C[M,N] = A[M,K] * B[K,N]. Every output element is accumulated in double in k
// order, so blocking over rows and columns does not change results and each
// output row depends only on its own input row.
template <class T>
void matmul_into(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m, std::size_t k,
                 std::size_t n) {
    constexpr std::size_t kRows = 8;
    constexpr std::size_t kCols = 256;
    double acc[kRows][kCols];
    for (std::size_t i0 = 0; i0 < m; i0 += kRows) {
        const std::size_t rows = std::min(kRows, m - i0);
        for (std::size_t j0 = 0; j0 < n; j0 += kCols) {
            const std::size_t cols = std::min(kCols, n - j0);
            for (std::size_t r = 0; r < rows; ++r) std::fill_n(acc[r], cols, 0.0);
            for (std::size_t p = 0; p < k; ++p) {
                const T* brow = b.data() + p * n + j0;
                for (std::size_t r = 0; r < rows; ++r) {
                    const double av = a[(i0 + r) * k + p];
                    double* ar = acc[r];
                    for (std::size_t j = 0; j < cols; ++j) ar[j] += av * static_cast<double>(brow[j]);
                }
            }
            for (std::size_t r = 0; r < rows; ++r) {
                T* crow = c.data() + (i0 + r) * n + j0;
                for (std::size_t j = 0; j < cols; ++j) crow[j] = static_cast<T>(acc[r][j]);
            }
        }
    }
}

template <class T>
std::vector<T> transpose(std::span<const T> x, std::size_t rows, std::size_t cols) {
    std::vector<T> out(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = x[r * cols + c];
    return out;
}

template <class T>
BasicTensor<T> forward(Primitive kind, std::span<const BasicTensor<T>* const> in) {
    if (in.size() != arity(kind)) {
        throw ShapeError(std::string(primitive_name(kind)) + ": expected " + std::to_string(arity(kind)) +
                         " inputs, got " + std::to_string(in.size()));
    }
    switch (kind) {
    case Primitive::matmul: {
        const auto& a = *in[0];
        const auto& b = *in[1];
        if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) shape_fail(kind, a.shape(), b.shape());
        BasicTensor<T> c(Shape{a.dim(0), b.dim(1)});
        matmul_into<T>(a.data(), b.data(), c.data(), a.dim(0), a.dim(1), b.dim(1));
        return c;
    }
    case Primitive::add: {
        const auto& x = *in[0];
        const auto& y = *in[1];
        check_broadcast(kind, x, y);
        BasicTensor<T> out = x;
        const std::size_t n = y.size();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i % n];
        return out;
    }
    case Primitive::mul: {
        const auto& x = *in[0];
        const auto& y = *in[1];
        if (x.shape() != y.shape()) shape_fail(kind, x.shape(), y.shape());
        BasicTensor<T> out = x;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
        return out;
    }
    case Primitive::silu: {
        BasicTensor<T> out = *in[0];
        for (auto& v : out.data()) {
            const double x = v;
            v = static_cast<T>(x * sigmoid(x));
        }
        return out;
    }
    case Primitive::film: {
        const auto& x = *in[0];
        const auto& scale = *in[1];
        const auto& shift = *in[2];
        check_broadcast(kind, x, scale);
        check_broadcast(kind, x, shift);
        BasicTensor<T> out = x;
        const std::size_t ns = scale.size();
        const std::size_t nh = shift.size();
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = x[i] * (T(1) + scale[i % ns]) + shift[i % nh];
        }
        return out;
    }
    case Primitive::concat: {
        const auto& a = *in[0];
        const auto& b = *in[1];
        if (a.rank() == 0 || a.rank() != b.rank() ||
            !std::equal(a.shape().begin(), a.shape().end() - 1, b.shape().begin())) {
            shape_fail(kind, a.shape(), b.shape());
        }
        const std::size_t wa = last_dim(a.shape());
        const std::size_t wb = last_dim(b.shape());
        const std::size_t rows = a.size() / std::max<std::size_t>(wa, 1);
        Shape s = a.shape();
        s.back() = wa + wb;
        BasicTensor<T> out(s);
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(a.data().data() + r * wa, wa, out.data().data() + r * (wa + wb));
            std::copy_n(b.data().data() + r * wb, wb, out.data().data() + r * (wa + wb) + wa);
        }
        return out;
    }
    case Primitive::mse: {
        const auto& a = *in[0];
        const auto& b = *in[1];
        if (a.shape() != b.shape()) shape_fail(kind, a.shape(), b.shape());
        double sum = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
            sum += d * d;
        }
        return BasicTensor<T>::scalar(static_cast<T>(sum / static_cast<double>(a.size())));
    }
    }
    throw ConfigError("unknown primitive kind");
}

template <class T>
void accumulate(std::optional<BasicTensor<T>>& slot, BasicTensor<T>&& g) {
    if (!slot) {
        slot = std::move(g);
        return;
    }
    auto dst = slot->data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Gradient of a broadcast operand: identity when shapes match, column sums otherwise.
template <class T>
BasicTensor<T> reduce_to(const BasicTensor<T>& full, const Shape& target) {
    if (full.shape() == target) return full;
    const std::size_t n = target[0];
    std::vector<double> acc(n, 0.0);
    for (std::size_t i = 0; i < full.size(); ++i) acc[i % n] += full[i];
    BasicTensor<T> out(target);
    for (std::size_t j = 0; j < n; ++j) out[j] = static_cast<T>(acc[j]);
    return out;
}

} // namespace

std::string_view primitive_name(Primitive kind) {
    for (const auto& [k, name] : kNames)
        if (k == kind) return name;
    return "unknown";
}

Primitive parse_primitive(std::string_view name) {
    for (const auto& [k, n] : kNames)
        if (n == name) return k;
    throw ConfigError("unknown primitive kind '" + std::string(name) + "'");
}

template <class T>
BasicTensor<T> apply_primitive(Primitive kind, std::span<const BasicTensor<T>* const> inputs) {
    return forward<T>(kind, inputs);
}

template <class T>
std::pair<BasicTensor<T>, BasicTensor<T>> split_last_axis(const BasicTensor<T>& x, std::size_t left_width) {
    if (x.rank() == 0 || left_width > x.shape().back()) {
        throw ShapeError("split_last_axis: cannot split " + shape_string(x.shape()) + " at " +
                         std::to_string(left_width));
    }
    const std::size_t w = x.shape().back();
    const std::size_t rows = w == 0 ? 0 : x.size() / w;
    Shape ls = x.shape();
    Shape rs = x.shape();
    ls.back() = left_width;
    rs.back() = w - left_width;
    BasicTensor<T> left(ls);
    BasicTensor<T> right(rs);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            const T v = x[r * w + c];
            if (c < left_width)
                left[r * left_width + c] = v;
            else
                right[r * (w - left_width) + (c - left_width)] = v;
        }
    }
    return {std::move(left), std::move(right)};
}

template <class T>
typename Tape<T>::Id Tape<T>::constant(BasicTensor<T> value) {
    values_.push_back(std::move(value));
    nodes_.emplace_back(std::nullopt);
    return values_.size() - 1;
}

template <class T>
typename Tape<T>::Id Tape<T>::parameter(BasicTensor<T> value) {
    const Id id = constant(std::move(value));
    params_.push_back(id);
    return id;
}

template <class T>
typename Tape<T>::Id Tape<T>::apply(Primitive kind, std::initializer_list<Id> inputs) {
    std::vector<const BasicTensor<T>*> ptrs;
    ptrs.reserve(inputs.size());
    for (Id id : inputs) {
        if (id >= values_.size()) throw ContractError("tape input id out of range");
        ptrs.push_back(&values_[id]);
    }
    BasicTensor<T> out = forward<T>(kind, std::span<const BasicTensor<T>* const>(ptrs));
    values_.push_back(std::move(out));
    nodes_.emplace_back(Node{kind, std::vector<Id>(inputs)});
    return values_.size() - 1;
}

template <class T>
typename Tape<T>::Gradients Tape<T>::backward(Id loss) const {
    if (loss >= values_.size()) throw ContractError("backward: loss id out of range");
    if (values_[loss].size() != 1) {
        throw ContractError("backward: loss must be scalar, got shape " + shape_string(values_[loss].shape()));
    }
    std::vector<std::optional<BasicTensor<T>>> grads(values_.size());
    grads[loss] = BasicTensor<T>(values_[loss].shape(), T(1));

    for (Id id = loss + 1; id-- > 0;) {
        if (!grads[id] || !nodes_[id]) continue;
        const Node& node = *nodes_[id];
        const BasicTensor<T>& g = *grads[id];
        const auto& in = node.inputs;
        switch (node.kind) {
        case Primitive::matmul: {
            const auto& a = values_[in[0]];
            const auto& b = values_[in[1]];
            const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
            // dA = dC * B^T, dB = A^T * dC, both through the row-accumulating kernel.
            BasicTensor<T> da(a.shape());
            const auto bt = transpose<T>(b.data(), k, n);
            matmul_into<T>(g.data(), bt, da.data(), m, n, k);
            BasicTensor<T> db(b.shape());
            const auto at = transpose<T>(a.data(), m, k);
            matmul_into<T>(at, g.data(), db.data(), k, m, n);
            accumulate(grads[in[0]], std::move(da));
            accumulate(grads[in[1]], std::move(db));
            break;
        }
        case Primitive::add: {
            accumulate(grads[in[0]], BasicTensor<T>(g));
            accumulate(grads[in[1]], reduce_to(g, values_[in[1]].shape()));
            break;
        }
        case Primitive::mul: {
            const auto& x = values_[in[0]];
            const auto& y = values_[in[1]];
            BasicTensor<T> dx(x.shape());
            BasicTensor<T> dy(y.shape());
            for (std::size_t i = 0; i < g.size(); ++i) {
                dx[i] = g[i] * y[i];
                dy[i] = g[i] * x[i];
            }
            accumulate(grads[in[0]], std::move(dx));
            accumulate(grads[in[1]], std::move(dy));
            break;
        }
        case Primitive::silu: {
            const auto& x = values_[in[0]];
            BasicTensor<T> dx(x.shape());
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double xv = x[i];
                const double s = sigmoid(xv);
                dx[i] = static_cast<T>(static_cast<double>(g[i]) * s * (1.0 + xv * (1.0 - s)));
            }
            accumulate(grads[in[0]], std::move(dx));
            break;
        }
        case Primitive::film: {
            const auto& x = values_[in[0]];
            const auto& scale = values_[in[1]];
            const auto& shift = values_[in[2]];
            const std::size_t ns = scale.size();
            BasicTensor<T> dx(x.shape());
            BasicTensor<T> dscale_full(x.shape());
            for (std::size_t i = 0; i < g.size(); ++i) {
                dx[i] = g[i] * (T(1) + scale[i % ns]);
                dscale_full[i] = g[i] * x[i];
            }
            accumulate(grads[in[0]], std::move(dx));
            accumulate(grads[in[1]], reduce_to(dscale_full, scale.shape()));
            accumulate(grads[in[2]], reduce_to(g, shift.shape()));
            break;
        }
        case Primitive::concat: {
            const std::size_t wa = last_dim(values_[in[0]].shape());
            auto [ga, gb] = split_last_axis(g, wa);
            accumulate(grads[in[0]], std::move(ga));
            accumulate(grads[in[1]], std::move(gb));
            break;
        }
        case Primitive::mse: {
            const auto& a = values_[in[0]];
            const auto& b = values_[in[1]];
            const double scale = 2.0 * static_cast<double>(g[0]) / static_cast<double>(a.size());
            BasicTensor<T> da(a.shape());
            BasicTensor<T> db(b.shape());
            for (std::size_t i = 0; i < a.size(); ++i) {
                const double d = scale * (static_cast<double>(a[i]) - static_cast<double>(b[i]));
                da[i] = static_cast<T>(d);
                db[i] = static_cast<T>(-d);
            }
            accumulate(grads[in[0]], std::move(da));
            accumulate(grads[in[1]], std::move(db));
            break;
        }
        }
    }

    Gradients out;
    for (Id p : params_) {
        out.emplace(p, grads[p] ? std::move(*grads[p]) : BasicTensor<T>(values_[p].shape()));
    }
    return out;
}

template <class T>
GradCheckReport finite_diff_check(const LossBuilder<T>& build, const std::vector<BasicTensor<T>>& params,
                                  double eps) {
    if (!(eps >= 1e-6 && eps <= 1e-2)) {
        throw ContractError("finite_diff_check: epsilon " + std::to_string(eps) + " outside [1e-6, 1e-2]");
    }
    auto evaluate = [&](const std::vector<BasicTensor<T>>& ps, std::vector<BasicTensor<T>>* grads) {
        Tape<T> tape;
        std::vector<typename Tape<T>::Id> ids;
        ids.reserve(ps.size());
        for (const auto& p : ps) ids.push_back(tape.parameter(p));
        const auto loss = build(tape, ids);
        const double value = static_cast<double>(tape.value(loss).item());
        if (grads) {
            auto g = tape.backward(loss);
            for (auto id : ids) grads->push_back(std::move(g.at(id)));
        }
        return value;
    };

    std::vector<BasicTensor<T>> analytic;
    evaluate(params, &analytic);

    GradCheckReport report;
    std::vector<BasicTensor<T>> work = params;
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t i = 0; i < params[p].size(); ++i) {
            const T original = params[p][i];
            const T up = static_cast<T>(static_cast<double>(original) + eps);
            const T down = static_cast<T>(static_cast<double>(original) - eps);
            work[p][i] = up;
            const double f_up = evaluate(work, nullptr);
            work[p][i] = down;
            const double f_down = evaluate(work, nullptr);
            work[p][i] = original;

            const double ad = static_cast<double>(analytic[p][i]);
            // Divide by the step actually taken after rounding to T.
            const double fd = (f_up - f_down) / (static_cast<double>(up) - static_cast<double>(down));
            if (!std::isfinite(f_up) || !std::isfinite(f_down) || !std::isfinite(ad)) {
                throw NumericError("finite_diff_check: non-finite value at parameter " + std::to_string(p) +
                                   " coordinate " + std::to_string(i));
            }
            const double rel = std::abs(ad - fd) / std::max(1e-8, std::abs(ad) + std::abs(fd));
            if (rel > report.max_relative_error) {
                report.max_relative_error = rel;
                report.worst_param = p;
                report.worst_index = i;
            }
            ++report.coordinates;
        }
    }
    return report;
}

template class Tape<float>;
template class Tape<double>;
template Tensor apply_primitive<float>(Primitive, std::span<const Tensor* const>);
template Tensor64 apply_primitive<double>(Primitive, std::span<const Tensor64* const>);
template std::pair<Tensor, Tensor> split_last_axis<float>(const Tensor&, std::size_t);
template std::pair<Tensor64, Tensor64> split_last_axis<double>(const Tensor64&, std::size_t);
template GradCheckReport finite_diff_check<float>(const LossBuilder<float>&, const std::vector<Tensor>&, double);
template GradCheckReport finite_diff_check<double>(const LossBuilder<double>&, const std::vector<Tensor64>&,
                                                   double);

} // namespace cblend
