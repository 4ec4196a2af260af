#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rwre/errors.hpp"

namespace rwre {

// Shortest decimal rendering that round-trips the binary double; keeps CSV
// payloads digest-stable across runs.
inline std::string format_double(double x) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline std::string format_int(std::int64_t x) { return std::to_string(x); }

// FNV-1a 64-bit, streamed over bytes.
class Digest {
  public:
    void update(const char* data, std::size_t len) {
        for (std::size_t i = 0; i < len; ++i) {
            h_ ^= static_cast<unsigned char>(data[i]);
            h_ *= 0x100000001b3ull;
        }
    }
    void update(const std::string& s) { update(s.data(), s.size()); }
    std::string hex() const {
        static const char* d = "0123456789abcdef";
        std::string out(16, '0');
        std::uint64_t h = h_;
        for (int i = 15; i >= 0; --i) {
            out[static_cast<std::size_t>(i)] = d[h & 0xf];
            h >>= 4;
        }
        return out;
    }

  private:
    std::uint64_t h_ = 0xcbf29ce484222325ull;
};

inline std::string digest_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot open " + p.string() + " for digesting");
    Digest d;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        d.update(buf, static_cast<std::size_t>(in.gcount()));
        if (!in) break;
    }
    return d.hex();
}

// CSV writer with \n line endings and full-precision doubles.
class CsvWriter {
  public:
    CsvWriter(std::filesystem::path path, const std::vector<std::string>& header)
        : path_(std::move(path)), out_(path_, std::ios::binary) {
        if (!out_) throw Error("cannot open " + path_.string() + " for writing");
        write_row_raw(header);
    }
    void write_row(const std::vector<std::string>& cells) { write_row_raw(cells); }
    const std::filesystem::path& path() const { return path_; }
    void close() { out_.close(); }

  private:
    void write_row_raw(const std::vector<std::string>& cells) {
        std::string line;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) line += ',';
            line += cells[i];
        }
        line += '\n';
        out_ << line;
    }
    std::filesystem::path path_;
    std::ofstream out_;
};

}  // namespace rwre
