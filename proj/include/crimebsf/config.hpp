#pragma once
// Flat `key = value` configuration files. Lines starting with '#' are
// comments; keys are unique.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace crimebsf {

class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig load(const std::filesystem::path& path);
    static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");

    [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }
    [[nodiscard]] std::optional<std::string> get(const std::string& key) const;
    [[nodiscard]] std::string require(const std::string& key) const;
    [[nodiscard]] std::string get_or(const std::string& key, const std::string& fallback) const;
    [[nodiscard]] double get_double(const std::string& key, double fallback) const;
    [[nodiscard]] long long get_int(const std::string& key, long long fallback) const;
    [[nodiscard]] bool get_bool(const std::string& key, bool fallback) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    // Resolve a path value relative to the directory of the file it came from.
    [[nodiscard]] std::filesystem::path path(const std::string& key) const;
    [[nodiscard]] std::optional<std::filesystem::path> optional_path(const std::string& key) const;

    [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }
    [[nodiscard]] const std::string& origin() const { return origin_; }
    [[nodiscard]] const std::filesystem::path& base_dir() const { return base_dir_; }
    void set_base_dir(std::filesystem::path p) { base_dir_ = std::move(p); }

    // Canonical text (sorted keys) and its FNV-1a hash.
    [[nodiscard]] std::string canonical() const;
    [[nodiscard]] std::string hash() const;

private:
    std::map<std::string, std::string> values_;
    std::string origin_;
    std::filesystem::path base_dir_;
};

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t seed = 14695981039346656037ULL);
std::string hex64(std::uint64_t v);

std::vector<std::string> split(const std::string& s, char sep);
std::string trim(const std::string& s);

}  // namespace crimebsf
