#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mgopt::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    /// File line number (1-based) of each row, for error messages.
    std::vector<std::size_t> lines;

    /// Column index by name, or -1.
    int column(std::string_view name) const;
};

/// RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF line endings.
Table read(const std::filesystem::path& path);
Table parse(std::string_view text);

/// Quotes a field only when it contains a comma, quote or line break.
std::string quote(std::string_view field);

void write_row(std::ostream& os, const std::vector<std::string>& fields);

/// Shortest representation that round-trips a double exactly.
std::string format_number(double value);

} // namespace mgopt::csv
