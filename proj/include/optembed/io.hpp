#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "optembed/matrix.hpp"

namespace optembed {

// Little-endian binary serialization used by the dataset cache and the
// checkpoint files. Bytes are written LSB-first explicitly so the formats do
// not depend on host endianness.

class BinaryWriter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void magic(const char m[4]) { buf_.insert(buf_.end(), m, m + 4); }
    void matrix(const Matrix& m) {
        u64(m.rows);
        u64(m.cols);
        for (double v : m.data) f64(v);
    }

    const std::vector<uint8_t>& bytes() const { return buf_; }

    // Atomic write: temp file in the same directory, then rename.
    void save(const std::string& path) const;

private:
    std::vector<uint8_t> buf_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::vector<uint8_t> bytes) : buf_(std::move(bytes)) {}

    static BinaryReader from_file(const std::string& path);

    uint8_t u8() { return take(1)[0]; }
    uint32_t u32() {
        const uint8_t* p = take(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
        return v;
    }
    uint64_t u64() {
        const uint8_t* p = take(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const uint32_t len = u32();
        const uint8_t* p = take(len);
        return std::string(reinterpret_cast<const char*>(p), len);
    }
    void expect_magic(const char m[4], const char* what) {
        const uint8_t* p = take(4);
        if (std::memcmp(p, m, 4) != 0) {
            throw std::runtime_error(std::string(what) + ": bad magic bytes");
        }
    }
    Matrix matrix() {
        const uint64_t rows = u64();
        const uint64_t cols = u64();
        Matrix m(rows, cols);
        for (double& v : m.data) v = f64();
        return m;
    }

    bool at_end() const { return pos_ == buf_.size(); }

private:
    const uint8_t* take(size_t n) {
        if (pos_ + n > buf_.size()) throw std::runtime_error("corrupt file: truncated");
        const uint8_t* p = buf_.data() + pos_;
        pos_ += n;
        return p;
    }

    std::vector<uint8_t> buf_;
    size_t pos_ = 0;
};

}  // namespace optembed
