#pragma once
// Minimal RFC 4180 CSV reading with header lookup and located errors.
// Lines starting with '#' before the header are skipped.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace crimebsf {

class CsvTable {
public:
    static CsvTable read(const std::filesystem::path& path);
    static CsvTable parse(const std::string& text, const std::string& origin);

    [[nodiscard]] const std::vector<std::string>& header() const { return header_; }
    [[nodiscard]] std::size_t rows() const { return rows_.size(); }
    [[nodiscard]] const std::string& origin() const { return origin_; }

    // Column index; throws InputError naming the file when missing.
    [[nodiscard]] std::size_t require_column(const std::string& name) const;
    [[nodiscard]] std::optional<std::size_t> column(const std::string& name) const;

    [[nodiscard]] const std::string& cell(std::size_t row, std::size_t col) const { return rows_[row][col]; }
    // Source line of a data row (1-based, header is line 1).
    [[nodiscard]] std::size_t line(std::size_t row) const { return lines_[row]; }

    // Numeric accessors; throw InputError with file, line and field on malformed input.
    [[nodiscard]] double number(std::size_t row, std::size_t col) const;
    [[nodiscard]] std::optional<double> optional_number(std::size_t row, std::size_t col) const;
    [[nodiscard]] long long integer(std::size_t row, std::size_t col) const;

private:
    std::string origin_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
    std::vector<std::size_t> lines_;
};

// Quote a field when needed.
std::string csv_escape(const std::string& field);

// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace crimebsf
