#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace frisk::csv {

struct Row {
    std::size_t line = 0;  ///< 1-based physical line where the record starts
    std::vector<std::string> fields;
};

/// RFC 4180 parsing: quoted fields may contain commas, quotes ("") and line
/// breaks. Throws ParseError("<source>:<line>") on an unterminated quote.
std::vector<Row> parse(std::string_view text, const std::string& source);
std::vector<Row> read_file(const std::string& path);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);
void write_row(std::ostream& os, const std::vector<std::string>& fields);

/// Nine significant digits, shortest form ("0.15", "2.89", "1e-07").
std::string format_real(double v);
/// Fixed nine decimal digits ("0.150000000"), used by SFM exports.
std::string format_fixed9(double v);

/// Strict numeric parsing; `locus` prefixes the error message.
double parse_real(std::string_view s, const std::string& locus);
long long parse_int(std::string_view s, const std::string& locus);

/// Throws unless `header` matches `expected` exactly.
void expect_header(const Row& header, const std::vector<std::string>& expected, const std::string& source);

} // namespace frisk::csv
