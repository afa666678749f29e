#pragma once

// Wide-format CSV ingestion and locale-independent CSV/number formatting.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "jblcsm/estimation.hpp"

namespace jblcsm {

/// Malformed user input; `row` is the 1-based line number in the file when known.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what, std::optional<std::size_t> row = std::nullopt);
    std::optional<std::size_t> row() const { return row_; }

private:
    std::optional<std::size_t> row_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers; // 1-based source line of each row
};

/// Splits on commas; a field wrapped in double quotes has the quotes removed.
std::vector<std::string> split_csv_line(std::string_view line);

/// Reads a comma-separated table with a header; blank lines are skipped and
/// rows whose width differs from the header raise InputError.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::filesystem::path& path);

/// Whole-cell decimal parse independent of the C locale; "nan" and "inf" accepted.
std::optional<double> parse_number(std::string_view cell);

/// Shortest representation that parses back to the same double.
std::string format_number(double v);

/// Header `id,y1..yJ,t1..tJ`, one individual per row.
Dataset read_wide_csv(std::istream& in);
Dataset ingest_csv(const std::filesystem::path& path);
void write_wide_csv(std::ostream& out, const Dataset& data);

void write_text_file(const std::filesystem::path& path, std::string_view content);

/// 64-bit FNV-1a digest as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

} // namespace jblcsm
