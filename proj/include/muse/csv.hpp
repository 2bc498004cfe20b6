#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace muse::io {

// Comma-separated table with a header row. Parsing is locale independent.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Column index by name, throws DataError if absent.
    [[nodiscard]] std::size_t column(std::string_view name) const;
};

[[nodiscard]] Table read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const Table& table);

[[nodiscard]] double parse_double(std::string_view text, std::string_view context = {});
[[nodiscard]] long parse_long(std::string_view text, std::string_view context = {});

// Shortest round-trip representation, '.' decimal separator.
[[nodiscard]] std::string format_double(double value);

// Split on a single character, no quoting.
[[nodiscard]] std::vector<std::string> split(std::string_view line, char sep = ',');

} // namespace muse::io
