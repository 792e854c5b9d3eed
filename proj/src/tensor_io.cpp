#include "cblend/bytes.hpp"
#include "cblend/tensor.hpp"

namespace cblend {

std::string shape_string(std::span<const std::size_t> shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

std::vector<std::uint8_t> serialize_tensor(const Tensor& tensor) {
    ByteWriter w;
    w.u64(tensor.rank());
    for (auto d : tensor.shape()) w.u64(d);
    for (float v : tensor.data()) w.f32(v);
    return w.take();
}

Tensor deserialize_tensor(std::span<const std::uint8_t> bytes, std::size_t& offset) {
    ByteReader r(bytes, offset);
    const std::uint64_t rank = r.u64();
    if (rank > r.remaining() / 8) {
        throw TruncationError("truncated input reading tensor dimensions (rank " + std::to_string(rank) + ")",
                              r.offset());
    }
    Shape shape(rank);
    std::size_t count = 1;
    const std::size_t value_budget = (r.remaining() - rank * 8) / 4;
    for (auto& d : shape) {
        d = r.u64();
        if (d != 0 && count > value_budget / d) {
            throw TruncationError("truncated input reading tensor values of shape with dimension " +
                                      std::to_string(d),
                                  r.offset());
        }
        count *= d;
    }
    r.need(count * 4, "tensor values");
    std::vector<float> data(count);
    for (auto& v : data) v = r.f32();
    offset = r.offset();
    return Tensor(std::move(shape), std::move(data));
}

Tensor deserialize_tensor(std::span<const std::uint8_t> bytes) {
    std::size_t offset = 0;
    Tensor t = deserialize_tensor(bytes, offset);
    if (offset != bytes.size()) {
        throw FormatError("trailing bytes after tensor record", offset);
    }
    return t;
}

} // namespace cblend
