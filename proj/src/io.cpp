#include "jblcsm/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace jblcsm {

namespace {

std::string with_row(const std::string& what, std::optional<std::size_t> row)
{
    return row ? "row " + std::to_string(*row) + ": " + what : what;
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

} // namespace

InputError::InputError(const std::string& what, std::optional<std::size_t> row)
    : std::runtime_error(with_row(what, row)), row_(row)
{
}

std::vector<std::string> split_csv_line(std::string_view line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        std::string_view field = trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
        if (field.size() >= 2 && field.front() == '"' && field.back() == '"')
            field = field.substr(1, field.size() - 2);
        out.emplace_back(field);
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return out;
}

CsvTable read_csv(std::istream& in)
{
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
            line.erase(0, 3);
        if (trim(line).empty())
            continue;
        auto fields = split_csv_line(line);
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size())
            throw InputError("expected " + std::to_string(t.header.size()) + " fields, found " +
                                 std::to_string(fields.size()),
                             lineno);
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(lineno);
    }
    if (!have_header)
        throw InputError("empty file: no header row");
    return t;
}

CsvTable read_csv_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot open " + path.string());
    return read_csv(in);
}

std::optional<double> parse_number(std::string_view cell)
{
    cell = trim(cell);
    if (cell.empty())
        return std::nullopt;
    if (cell.front() == '+')
        cell.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size())
        return std::nullopt;
    return v;
}

std::string format_number(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

Dataset read_wide_csv(std::istream& in)
{
    const CsvTable t = read_csv(in);
    const std::size_t cols = t.header.size();
    if (cols < 3 || (cols - 1) % 2 != 0 || t.header[0] != "id")
        throw InputError("header must be id,y1..yJ,t1..tJ", 1);
    const std::size_t J = (cols - 1) / 2;
    for (std::size_t j = 0; j < J; ++j) {
        if (t.header[1 + j] != "y" + std::to_string(j + 1) || t.header[1 + J + j] != "t" + std::to_string(j + 1))
            throw InputError("header must be id,y1..yJ,t1..tJ", 1);
    }

    Dataset data;
    data.individuals.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::size_t line = t.line_numbers[r];
        if (row[0].empty())
            throw InputError("missing id", line);
        Eigen::VectorXd y(static_cast<Eigen::Index>(J)), times(static_cast<Eigen::Index>(J));
        for (std::size_t j = 0; j < J; ++j) {
            const auto yv = parse_number(row[1 + j]);
            const auto tv = parse_number(row[1 + J + j]);
            if (!yv || !std::isfinite(*yv))
                throw InputError("non-numeric cell in column " + t.header[1 + j] + ": '" + row[1 + j] + "'", line);
            if (!tv || !std::isfinite(*tv))
                throw InputError("non-numeric cell in column " + t.header[1 + J + j] + ": '" + row[1 + J + j] + "'",
                                 line);
            y(static_cast<Eigen::Index>(j)) = *yv;
            times(static_cast<Eigen::Index>(j)) = *tv;
        }
        for (Eigen::Index j = 1; j < times.size(); ++j)
            if (!(times(j) > times(j - 1)))
                throw InputError("times not strictly increasing (t" + std::to_string(j + 1) + " <= t" +
                                     std::to_string(j) + ")",
                                 line);
        data.individuals.push_back({row[0], std::move(y), Schedule(std::move(times))});
    }
    if (data.individuals.empty())
        throw InputError("no data rows");
    return data;
}

Dataset ingest_csv(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot open " + path.string());
    return read_wide_csv(in);
}

void write_wide_csv(std::ostream& out, const Dataset& data)
{
    const Eigen::Index J = data.waves();
    out << "id";
    for (Eigen::Index j = 1; j <= J; ++j)
        out << ",y" << j;
    for (Eigen::Index j = 1; j <= J; ++j)
        out << ",t" << j;
    out << '\n';
    for (const auto& ind : data.individuals) {
        out << ind.id;
        for (Eigen::Index j = 0; j < J; ++j)
            out << ',' << format_number(ind.y(j));
        for (Eigen::Index j = 0; j < J; ++j)
            out << ',' << format_number(ind.schedule[j]);
        out << '\n';
    }
}

void write_text_file(const std::filesystem::path& path, std::string_view content)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out)
        throw std::runtime_error("write failed: " + path.string());
}

std::string fnv1a_hex(std::string_view text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace jblcsm
