#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cblend/error.hpp"

namespace cblend {

/// Appends little-endian encoded values to a byte buffer.
class ByteWriter {
public:
    void u32(std::uint32_t v) { put_le(v, 4); }
    void u64(std::uint64_t v) { put_le(v, 8); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    void raw(std::span<const std::uint8_t> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

    /// u32 length prefix followed by the bytes.
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

    const std::vector<std::uint8_t>& bytes() const noexcept { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    void put_le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) {
            buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }

    std::vector<std::uint8_t> buf_;
};

/// Bounds-checked little-endian reader; every short read throws TruncationError.
class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> bytes, std::size_t offset = 0) : bytes_(bytes), pos_(offset) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
    std::uint64_t u64() { return get_le(8); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

    std::span<const std::uint8_t> raw(std::size_t n) {
        need(n, "raw bytes");
        auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    std::string str() {
        const std::size_t n = u32();
        auto b = raw(n);
        return std::string(b.begin(), b.end());
    }

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

    void need(std::size_t n, std::string_view what) const {
        if (bytes_.size() - pos_ < n) {
            throw TruncationError("truncated input reading " + std::string(what) + ": need " +
                                      std::to_string(n) + " bytes, have " + std::to_string(bytes_.size() - pos_),
                                  pos_);
        }
    }

private:
    std::uint64_t get_le(int n) {
        need(static_cast<std::size_t>(n), n == 4 ? "u32" : "u64");
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_;
};

} // namespace cblend
