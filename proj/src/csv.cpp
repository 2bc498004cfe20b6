#include "muse/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "muse/error.hpp"

namespace muse::io {

std::size_t Table::column(std::string_view name) const
{
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw DataError("missing column '" + std::string(name) + "'");
}

std::vector<std::string> split(std::string_view line, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

Table read_csv(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    Table t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (first) {
            // tolerate a UTF-8 byte order mark
            if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
            t.header = split(line);
            first = false;
            continue;
        }
        if (line.empty()) continue;
        auto fields = split(line);
        if (fields.size() != t.header.size())
            throw DataError("'" + path.string() + "': row " + std::to_string(t.rows.size() + 1) + " has "
                            + std::to_string(fields.size()) + " fields, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(fields));
    }
    if (first) throw DataError("'" + path.string() + "' is empty");
    return t;
}

void write_csv(const std::filesystem::path& path, const Table& table)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    auto write_row = [&](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << row[i];
        }
        out << '\n';
    };
    write_row(table.header);
    for (const auto& r : table.rows) write_row(r);
    if (!out) throw DataError("error writing '" + path.string() + "'");
}

double parse_double(std::string_view text, std::string_view context)
{
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value))
        throw DataError("invalid number '" + std::string(text) + "'"
                        + (context.empty() ? std::string() : " in " + std::string(context)));
    return value;
}

long parse_long(std::string_view text, std::string_view context)
{
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    long value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw DataError("invalid integer '" + std::string(text) + "'"
                        + (context.empty() ? std::string() : " in " + std::string(context)));
    return value;
}

std::string format_double(double value)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc()) throw DataError("cannot format number");
    return {buf, ptr};
}

} // namespace muse::io
