#include "crimebsf/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "crimebsf/config.hpp"
#include "crimebsf/errors.hpp"

namespace crimebsf {

namespace {

// Splits one logical record; `pos` advances past the record terminator.
std::vector<std::string> next_record(const std::string& text, std::size_t& pos, std::size_t& lineno) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    while (pos < text.size()) {
        const char c = text[pos];
        if (quoted) {
            if (c == '"') {
                if (pos + 1 < text.size() && text[pos + 1] == '"') {
                    cur.push_back('"');
                    ++pos;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++lineno;
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c == '\n') {
            ++pos;
            ++lineno;
            fields.push_back(cur);
            return fields;
        } else if (c != '\r') {
            cur.push_back(c);
        }
        ++pos;
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

CsvTable CsvTable::read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

CsvTable CsvTable::parse(const std::string& text, const std::string& origin) {
    CsvTable t;
    t.origin_ = origin;
    std::size_t pos = 0;
    std::size_t lineno = 1;
    // Leading '#' lines are provenance stamps.
    while (pos < text.size() && text[pos] == '#') {
        const auto nl = text.find('\n', pos);
        pos = nl == std::string::npos ? text.size() : nl + 1;
        ++lineno;
    }
    if (pos >= text.size()) throw InputError(origin + ": empty file (missing header)");
    t.header_ = next_record(text, pos, lineno);
    for (auto& h : t.header_) h = trim(h);
    while (pos < text.size()) {
        const std::size_t start_line = lineno;
        auto rec = next_record(text, pos, lineno);
        if (rec.size() == 1 && trim(rec[0]).empty()) continue;
        if (rec.size() != t.header_.size())
            throw InputError(origin + ":" + std::to_string(start_line) + ": expected " +
                             std::to_string(t.header_.size()) + " fields, found " + std::to_string(rec.size()));
        t.rows_.push_back(std::move(rec));
        t.lines_.push_back(start_line);
    }
    return t;
}

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header_.size(); ++i)
        if (header_[i] == name) return i;
    return std::nullopt;
}

std::size_t CsvTable::require_column(const std::string& name) const {
    auto c = column(name);
    if (!c) throw InputError(origin_ + ": missing required column '" + name + "'");
    return *c;
}

std::optional<double> CsvTable::optional_number(std::size_t row, std::size_t col) const {
    const std::string s = trim(rows_[row][col]);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
        throw InputError(origin_ + ":" + std::to_string(lines_[row]) + ": field '" + header_[col] +
                         "' is not a finite number ('" + s + "')");
    return v;
}

double CsvTable::number(std::size_t row, std::size_t col) const {
    auto v = optional_number(row, col);
    if (!v)
        throw InputError(origin_ + ":" + std::to_string(lines_[row]) + ": field '" + header_[col] + "' is empty");
    return *v;
}

long long CsvTable::integer(std::size_t row, std::size_t col) const {
    const std::string s = trim(rows_[row][col]);
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw InputError(origin_ + ":" + std::to_string(lines_[row]) + ": field '" + header_[col] +
                         "' is not an integer ('" + s + "')");
    return v;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace crimebsf
