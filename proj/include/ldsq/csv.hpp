#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ldsq/common.hpp"

namespace ldsq {

// Deterministic CSV formatting: identical (spec, seed, version) inputs must
// produce identical bytes, and floating values round-trip at 17 significant
// digits.

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class CsvWriter {
  public:
    explicit CsvWriter(std::vector<std::string> header) : columns_(std::move(header)) {}

    void add_row(const std::vector<std::string>& cells) {
        require(cells.size() == columns_.size(), "csv: row width mismatch");
        rows_.push_back(cells);
    }

    std::string str() const {
        std::string out = join(columns_);
        for (const auto& r : rows_) out += join(r);
        return out;
    }

    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        require(bool(out), "cannot open " + path + " for writing");
        out << str();
    }

  private:
    static std::string join(const std::vector<std::string>& cells) {
        std::string line;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) line += ',';
            line += cells[i];
        }
        line += '\n';
        return line;
    }
    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

// stable 64-bit FNV-1a content hash for manifests
inline std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace ldsq
