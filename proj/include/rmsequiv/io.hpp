#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rmsequiv/data_model.hpp"
#include "rmsequiv/error.hpp"

namespace rmsequiv {

/// Malformed input file; line and column are 1-based.
class ParseError : public ValidationError {
  public:
    ParseError(std::size_t line, std::size_t column, const std::string& what)
        : ValidationError("line " + std::to_string(line) + ", column " + std::to_string(column) +
                          ": " + what),
          line_(line), column_(column) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] std::size_t column() const noexcept { return column_; }

  private:
    std::size_t line_;
    std::size_t column_;
};

namespace detail {

struct CsvField {
    std::string_view text;
    std::size_t column;  // 1-based position of the first character
};

inline std::vector<CsvField> split_csv_line(std::string_view line) {
    std::vector<CsvField> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        std::string_view raw = line.substr(start, comma == line.npos ? line.npos : comma - start);
        std::size_t col = start + 1;
        while (!raw.empty() && (raw.front() == ' ' || raw.front() == '\t')) {
            raw.remove_prefix(1);
            ++col;
        }
        while (!raw.empty() && (raw.back() == ' ' || raw.back() == '\t' || raw.back() == '\r')) {
            raw.remove_suffix(1);
        }
        out.push_back({raw, col});
        if (comma == line.npos) {
            return out;
        }
        start = comma + 1;
    }
}

inline bool blank(std::string_view line) {
    return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

/// Reads the header and then calls row(fields, line_no) for every data line.
template <class Row>
void read_csv(std::istream& in, std::string_view expected_header, Row&& row) {
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) {
            view.remove_prefix(3);
        }
        if (blank(view)) {
            continue;
        }
        auto fields = split_csv_line(view);
        if (!header_seen) {
            std::string header;
            for (const auto& f : fields) {
                header += (header.empty() ? "" : ",") + std::string(f.text);
            }
            if (header != expected_header) {
                throw ParseError(line_no, 1,
                                 "expected header '" + std::string(expected_header) + "', got '" +
                                     header + "'");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != 2) {
            throw ParseError(line_no, fields.size() > 2 ? fields[2].column - 1 : view.size() + 1,
                             "expected 2 fields, found " + std::to_string(fields.size()));
        }
        row(fields, line_no);
    }
    if (!header_seen) {
        throw ParseError(line_no + 1, 1, "missing header '" + std::string(expected_header) + "'");
    }
}

template <class T>
T parse_field(const CsvField& f, std::size_t line_no, const char* what) {
    T value{};
    const auto* end = f.text.data() + f.text.size();
    const auto [ptr, ec] = std::from_chars(f.text.data(), end, value);
    if (f.text.empty() || ec != std::errc() || ptr != end) {
        throw ParseError(line_no, f.column,
                         std::string("invalid ") + what + " '" + std::string(f.text) + "'");
    }
    return value;
}

}  // namespace detail

/// Long format: header `subject,value`, one measurement difference per row.
/// Rows of a subject need not be contiguous; subjects keep first-appearance order.
inline GroupedSample read_long_csv(std::istream& in) {
    std::vector<SubjectValues> groups;
    std::map<std::string, std::size_t, std::less<>> index;
    detail::read_csv(in, "subject,value", [&](const auto& fields, std::size_t line_no) {
        if (fields[0].text.empty()) {
            throw ParseError(line_no, fields[0].column, "empty subject id");
        }
        const double v = detail::parse_field<double>(fields[1], line_no, "value");
        if (!std::isfinite(v)) {
            throw ParseError(line_no, fields[1].column, "non-finite value");
        }
        auto it = index.find(fields[0].text);
        if (it == index.end()) {
            it = index.emplace(std::string(fields[0].text), groups.size()).first;
            groups.push_back({std::string(fields[0].text), {}});
        }
        groups[it->second].values.push_back(v);
    });
    return GroupedSample(std::move(groups));
}

/// Summary format: header `m,mean`, one row per subject in index order. The
/// within-subject sum of squares is not part of the file and is passed in.
inline SummaryStats read_summary_csv(std::istream& in, double sse) {
    std::vector<int> m;
    std::vector<double> mean;
    detail::read_csv(in, "m,mean", [&](const auto& fields, std::size_t line_no) {
        const int count = detail::parse_field<int>(fields[0], line_no, "count");
        if (count < 1) {
            throw ParseError(line_no, fields[0].column, "count must be a positive integer");
        }
        m.push_back(count);
        mean.push_back(detail::parse_field<double>(fields[1], line_no, "mean"));
    });
    return SummaryStats(std::move(m), std::move(mean), sse);
}

}  // namespace rmsequiv
