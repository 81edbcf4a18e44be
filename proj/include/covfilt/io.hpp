#pragma once

#include <covfilt/common.hpp>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace covfilt {

// Serialization helpers. Numeric round trips are exact: weight blobs store
// raw little-endian 64-bit doubles in base64, CSV cells use %.17g.

namespace io {

inline constexpr char kBase64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(const std::uint8_t* data, std::size_t n) {
    std::string out;
    out.reserve((n + 2) / 3 * 4);
    for (std::size_t i = 0; i < n; i += 3) {
        std::uint32_t chunk = static_cast<std::uint32_t>(data[i]) << 16;
        if (i + 1 < n) chunk |= static_cast<std::uint32_t>(data[i + 1]) << 8;
        if (i + 2 < n) chunk |= static_cast<std::uint32_t>(data[i + 2]);
        out.push_back(kBase64Alphabet[(chunk >> 18) & 0x3F]);
        out.push_back(kBase64Alphabet[(chunk >> 12) & 0x3F]);
        out.push_back(i + 1 < n ? kBase64Alphabet[(chunk >> 6) & 0x3F] : '=');
        out.push_back(i + 2 < n ? kBase64Alphabet[chunk & 0x3F] : '=');
    }
    return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& text) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    if (text.size() % 4 != 0) throw std::invalid_argument("base64_decode: length is not a multiple of 4");
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int pad = 0;
        std::uint32_t chunk = 0;
        for (std::size_t j = 0; j < 4; ++j) {
            char c = text[i + j];
            if (c == '=') {
                if (i + 4 != text.size() || j < 2) throw std::invalid_argument("base64_decode: misplaced padding");
                ++pad;
                chunk <<= 6;
                continue;
            }
            if (pad > 0) throw std::invalid_argument("base64_decode: data after padding");
            int v = value_of(c);
            if (v < 0) throw std::invalid_argument(std::string("base64_decode: invalid character '") + c + "'");
            chunk = (chunk << 6) | static_cast<std::uint32_t>(v);
        }
        out.push_back(static_cast<std::uint8_t>((chunk >> 16) & 0xFF));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>((chunk >> 8) & 0xFF));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(chunk & 0xFF));
    }
    return out;
}

// Doubles as little-endian bytes, independent of host byte order.
inline std::string doubles_to_base64(const double* p, std::size_t n) {
    std::vector<std::uint8_t> bytes(n * 8);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &p[i], 8);
        for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<std::uint8_t>((bits >> (8 * b)) & 0xFF);
    }
    return base64_encode(bytes.data(), bytes.size());
}

inline std::vector<double> base64_to_doubles(const std::string& text) {
    std::vector<std::uint8_t> bytes = base64_decode(text);
    if (bytes.size() % 8 != 0) throw std::invalid_argument("base64_to_doubles: byte count is not a multiple of 8");
    std::vector<double> out(bytes.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
        std::memcpy(&out[i], &bits, 8);
    }
    return out;
}

inline std::string mat_to_base64(const Mat& m) {
    // column-major, Eigen's native layout
    return doubles_to_base64(m.data(), static_cast<std::size_t>(m.size()));
}

inline Mat mat_from_base64(const std::string& text, Eigen::Index rows, Eigen::Index cols) {
    std::vector<double> v = base64_to_doubles(text);
    if (static_cast<Eigen::Index>(v.size()) != rows * cols)
        throw std::invalid_argument("mat_from_base64: expected " + std::to_string(rows * cols) + " values, got " +
                                    std::to_string(v.size()));
    Mat m(rows, cols);
    std::memcpy(m.data(), v.data(), v.size() * sizeof(double));
    return m;
}

inline std::uint64_t fnv1a64(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

// Shortest exact decimal form: every double round-trips through this.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file for reading: " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path.string());
    out << content;
    if (!out) throw std::runtime_error("failed while writing: " + path.string());
}

// Minimal CSV: numeric cells plus bare (unquoted) names, comma separated.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::unordered_map<std::string, std::size_t> index;

    std::size_t column(const std::string& name) const {
        auto it = index.find(name);
        if (it == index.end()) throw std::invalid_argument("csv: missing column '" + name + "'");
        return it->second;
    }

    double at(std::size_t row, const std::string& name) const { return rows[row][column(name)]; }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file for reading: " + path.string());
    CsvTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (table.header.empty()) {
            table.header = cells;
            for (std::size_t i = 0; i < cells.size(); ++i) table.index.emplace(cells[i], i);
            continue;
        }
        if (cells.size() != table.header.size())
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                                     std::to_string(table.header.size()) + " cells, got " +
                                     std::to_string(cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i) {
            char* end = nullptr;
            row[i] = std::strtod(cells[i].c_str(), &end);
            if (end == cells[i].c_str() || *end != '\0')
                throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": cell '" + cells[i] +
                                         "' in column '" + table.header[i] + "' is not a number");
        }
        table.rows.push_back(std::move(row));
    }
    if (table.header.empty()) throw std::runtime_error(path.string() + ": empty csv file");
    return table;
}

inline std::string csv_line(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) line.push_back(',');
        line += cells[i];
    }
    line.push_back('\n');
    return line;
}

}  // namespace io

}  // namespace covfilt
