#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cblend/tensor.hpp"

namespace cblend {

/// 9 significant digits, '.' decimal separator, locale independent.
std::string format_number(double v);

/// Fixed decimals.
std::string format_fixed(double v, int decimals);

/// Header row plus data rows, written with LF line endings and RFC-4180 quoting.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Throws ShapeError when a row's width differs from the header.
    std::string to_string() const;

    bool operator==(const CsvTable&) const = default;
};

/// Reads text produced by CsvTable::to_string (quoted fields, CRLF or LF). Throws ValidationError.
CsvTable parse_csv(std::string_view text);

/// Binary P6: the [0,1] grayscale image (row-major, height*width values) replicated to RGB.
std::vector<std::uint8_t> encode_ppm(std::span<const float> gray, std::size_t width, std::size_t height);

/// A row of glyph images side by side, separated by one black column.
std::vector<std::uint8_t> encode_ppm_strip(const std::vector<Tensor>& images, std::size_t side);

/// A labelled 2-D point for scatter plots.
struct ScatterPoint {
    double x = 0.0;
    double y = 0.0;
    std::string label;
};

/**
 * Scatter plot over the fixed viewport [-10,10]^2 (y up). Colors come from
 * the position of each label in `legend`; unknown labels are drawn grey.
 */
std::string encode_svg(std::span<const ScatterPoint> points, std::span<const std::string> legend,
                       std::string_view title = {});

void write_text_file(const std::filesystem::path& path, std::string_view text);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

} // namespace cblend
