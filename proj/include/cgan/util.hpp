#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cgan {

// FNV-1a, used for content checksums in manifests and provenance records.
inline std::uint64_t fnv1a64(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
    return fnv1a64(s.data(), s.size());
}

// Round-trip decimal form (%.17g), locale independent.
std::string format_double(double v);

// Fixed 9-decimal form used for coordinate output.
std::string format_fixed9(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// Regular files in a directory, sorted by filename.
std::vector<std::filesystem::path> list_files_sorted(const std::filesystem::path& dir);

std::string hex_u64(std::uint64_t v);

} // namespace cgan
