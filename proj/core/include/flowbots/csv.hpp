#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "flowbots/mocap.hpp"

namespace flowbots::cli {

// Shortest text that reads back to the same double ("%.17g" style, "nan" and
// "inf" spelled out). Used for every number the tools emit.
std::string format_number(double value);

// Strict decimal parse; throws ParseError carrying `line`.
double parse_number(std::string_view text, std::size_t line);

// RFC 4180 subset: comma separated, fields quoted only when they contain a
// comma, quote or newline. Rows end with '\n'.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);

    CsvWriter& field(std::string_view text);
    CsvWriter& field(double value) { return field(std::string_view(format_number(value))); }
    CsvWriter& field(int value);
    CsvWriter& field(std::size_t value);
    CsvWriter& empty() { return field(std::string_view()); }
    // Throws InputError unless the row has exactly one field per column.
    void end_row();

    const std::string& str() const { return text_; }
    std::size_t columns() const { return columns_; }

private:
    std::string text_;
    std::size_t columns_;
    std::size_t pending_ = 0;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;  // 1-based source line of each row

    std::size_t column(std::string_view name) const;  // throws LookupError
    double number(std::size_t row, std::string_view name) const;
};

// Reads the format CsvWriter produces. Throws ParseError naming the line on a
// ragged row or an unterminated quote.
CsvTable read_csv(std::string_view text);

// Marker tracks: header `t,x1,y1,x2,y2,x3,y3,x4,y4`, seconds and mm.
inline constexpr std::array<const char*, 9> kMarkerHeader{"t",  "x1", "y1", "x2", "y2",
                                                          "x3", "y3", "x4", "y4"};

std::vector<mocap::MarkerFrame> read_marker_csv(std::string_view text);
std::string write_marker_csv(const std::vector<mocap::MarkerFrame>& frames);

}  // namespace flowbots::cli
