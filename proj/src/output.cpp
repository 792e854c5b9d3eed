#include "cblend/output.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "cblend/error.hpp"
#include "cblend/trainer.hpp"

namespace cblend {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 9);
    if (ec != std::errc()) throw NumericError("format_number: conversion failed");
    return std::string(buf.data(), end);
}

std::string format_fixed(double v, int decimals) {
    if (!std::isfinite(v)) return format_number(v);
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, decimals);
    if (ec != std::errc()) throw NumericError("format_fixed: conversion failed");
    return std::string(buf.data(), end);
}

namespace {

std::string quote_field(const std::string& f) {
    if (f.find_first_of(",\"\r\n") == std::string::npos) return f;
    std::string out = "\"";
    for (char c : f) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void append_row(std::string& out, const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        out += quote_field(row[i]);
    }
    out += '\n';
}

} // namespace

std::string CsvTable::to_string() const {
    std::string out;
    append_row(out, header);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != header.size()) {
            throw ShapeError("csv: row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                             " fields, header has " + std::to_string(header.size()));
        }
        append_row(out, rows[r]);
    }
    return out;
}

CsvTable parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t i = 0;
    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(record));
        record.clear();
    };
    while (i < text.size()) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            if (field_started) throw ValidationError("csv: stray quote at byte " + std::to_string(i));
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
            end_record();
            ++i;
        } else if (c == '\n') {
            end_record();
        } else {
            field += c;
            field_started = true;
        }
        ++i;
    }
    if (quoted) throw ValidationError("csv: unterminated quoted field");
    if (field_started || !record.empty()) end_record();
    if (records.empty()) throw ValidationError("csv: missing header row");
    CsvTable t;
    t.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != t.header.size()) {
            throw ValidationError("csv: record " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                                  " fields, header has " + std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(records[r]));
    }
    return t;
}

std::vector<std::uint8_t> encode_ppm(std::span<const float> gray, std::size_t width, std::size_t height) {
    if (width == 0 || height == 0 || gray.size() != width * height) {
        throw ShapeError("ppm: " + std::to_string(gray.size()) + " values for a " + std::to_string(width) + "x" +
                         std::to_string(height) + " image");
    }
    const std::string header = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(header.size() + 3 * gray.size());
    for (float v : gray) {
        const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
        const auto b = static_cast<std::uint8_t>(std::lround(c * 255.0));
        out.insert(out.end(), {b, b, b});
    }
    return out;
}

std::vector<std::uint8_t> encode_ppm_strip(const std::vector<Tensor>& images, std::size_t side) {
    if (images.empty()) throw ContractError("ppm strip: no images");
    const std::size_t width = images.size() * (side + 1) - 1;
    std::vector<float> canvas(width * side, 0.0f);
    for (std::size_t k = 0; k < images.size(); ++k) {
        if (images[k].size() != side * side) throw ShapeError("ppm strip: image " + std::to_string(k) + " is not square");
        for (std::size_t r = 0; r < side; ++r)
            for (std::size_t c = 0; c < side; ++c) canvas[r * width + k * (side + 1) + c] = images[k][r * side + c];
    }
    return encode_ppm(canvas, width, side);
}

namespace {

constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                              "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

std::string encode_svg(std::span<const ScatterPoint> points, std::span<const std::string> legend,
                       std::string_view title) {
    constexpr double kSize = 400.0;
    constexpr double kHalf = 10.0;
    auto px = [](double v) { return format_fixed((v + kHalf) / (2 * kHalf) * kSize, 2); };
    auto py = [](double v) { return format_fixed((kHalf - v) / (2 * kHalf) * kSize, 2); };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"400\" height=\"400\" viewBox=\"0 0 400 400\">\n";
    if (!title.empty()) out += "<title>" + xml_escape(title) + "</title>\n";
    out += "<rect x=\"0\" y=\"0\" width=\"400\" height=\"400\" fill=\"white\" stroke=\"black\"/>\n";
    out += "<line x1=\"200\" y1=\"0\" x2=\"200\" y2=\"400\" stroke=\"#cccccc\"/>\n";
    out += "<line x1=\"0\" y1=\"200\" x2=\"400\" y2=\"200\" stroke=\"#cccccc\"/>\n";
    for (const auto& p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) continue;
        if (std::abs(p.x) > kHalf || std::abs(p.y) > kHalf) continue;
        auto it = std::find(legend.begin(), legend.end(), p.label);
        const char* color =
            it == legend.end() ? "#999999" : kPalette[static_cast<std::size_t>(it - legend.begin()) % kPalette.size()];
        out += "<circle cx=\"" + px(p.x) + "\" cy=\"" + py(p.y) + "\" r=\"1.5\" fill=\"" + color + "\"/>\n";
    }
    for (std::size_t i = 0; i < legend.size(); ++i) {
        const std::string y = std::to_string(16 + 14 * i);
        out += "<text x=\"8\" y=\"" + y + "\" font-size=\"12\" fill=\"" + kPalette[i % kPalette.size()] + "\">" +
               xml_escape(legend[i]) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) { write_text_file(path, table.to_string()); }

} // namespace cblend
