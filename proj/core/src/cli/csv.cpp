#include "flowbots/csv.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "flowbots/errors.hpp"

namespace flowbots::cli {

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    // fmt's default is the shortest round-trip representation.
    return fmt::format("{}", value);
}

double parse_number(std::string_view text, std::size_t line) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
        text.remove_suffix(1);
    }
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
        throw ParseError(fmt::format("line {}: '{}' is not a number", line, text), line);
    }
    return value;
}

// ---------------------------------------------------------------------------

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
    for (const auto& h : header) field(h);
    end_row();
}

CsvWriter& CsvWriter::field(std::string_view text) {
    if (pending_ > 0) text_ += ',';
    if (text.find_first_of(",\"\n\r") != std::string_view::npos) {
        text_ += '"';
        for (char c : text) {
            if (c == '"') text_ += '"';
            text_ += c;
        }
        text_ += '"';
    } else {
        text_.append(text);
    }
    ++pending_;
    return *this;
}

CsvWriter& CsvWriter::field(int value) { return field(std::string_view(fmt::format("{}", value))); }

CsvWriter& CsvWriter::field(std::size_t value) {
    return field(std::string_view(fmt::format("{}", value)));
}

void CsvWriter::end_row() {
    if (pending_ != columns_) {
        throw InputError(fmt::format("csv row has {} fields, header has {}", pending_, columns_));
    }
    text_ += '\n';
    pending_ = 0;
}

// ---------------------------------------------------------------------------

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw LookupError(fmt::format("no column '{}'", name));
}

double CsvTable::number(std::size_t row, std::string_view name) const {
    return parse_number(rows.at(row).at(column(name)), lines.at(row));
}

CsvTable read_csv(std::string_view text) {
    CsvTable table;
    std::vector<std::string> record;
    std::string cell;
    std::size_t line = 1;
    std::size_t record_line = 1;
    bool quoted = false;
    bool any = false;  // current record has content

    const auto finish = [&] {
        record.push_back(std::move(cell));
        cell.clear();
        if (table.header.empty()) {
            table.header = std::move(record);
        } else if (record.size() != table.header.size()) {
            throw ParseError(fmt::format("line {}: expected {} fields, got {}", record_line,
                                         table.header.size(), record.size()),
                             record_line);
        } else {
            table.rows.push_back(std::move(record));
            table.lines.push_back(record_line);
        }
        record.clear();
        any = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                cell += c;
            }
            continue;
        }
        if (!any) record_line = line;
        switch (c) {
            case '"':
                quoted = true;
                any = true;
                break;
            case ',':
                record.push_back(std::move(cell));
                cell.clear();
                any = true;
                break;
            case '\r':
                break;
            case '\n':
                if (any || !cell.empty()) finish();
                ++line;
                break;
            default:
                cell += c;
                any = true;
        }
    }
    if (quoted) throw ParseError(fmt::format("line {}: unterminated quote", record_line), record_line);
    if (any || !cell.empty()) finish();
    if (table.header.empty()) throw ParseError("empty csv", 1);
    return table;
}

// ---------------------------------------------------------------------------

std::vector<mocap::MarkerFrame> read_marker_csv(std::string_view text) {
    const CsvTable table = read_csv(text);
    bool header_ok = table.header.size() == kMarkerHeader.size();
    for (std::size_t i = 0; header_ok && i < kMarkerHeader.size(); ++i) {
        header_ok = table.header[i] == kMarkerHeader[i];
    }
    if (!header_ok) throw ParseError("line 1: expected header t,x1,y1,x2,y2,x3,y3,x4,y4", 1);

    std::vector<mocap::MarkerFrame> frames;
    frames.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.lines[r];
        mocap::MarkerFrame f;
        f.t = parse_number(row[0], line);
        for (std::size_t k = 0; k < 4; ++k) {
            f.points[k] = {parse_number(row[1 + 2 * k], line), parse_number(row[2 + 2 * k], line)};
        }
        frames.push_back(f);
    }
    return frames;
}

std::string write_marker_csv(const std::vector<mocap::MarkerFrame>& frames) {
    CsvWriter w({kMarkerHeader.begin(), kMarkerHeader.end()});
    for (const auto& f : frames) {
        w.field(f.t);
        for (const auto& p : f.points) w.field(p.x).field(p.y);
        w.end_row();
    }
    return w.str();
}

}  // namespace flowbots::cli
