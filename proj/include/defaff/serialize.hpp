#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace defaff {

// Little-endian byte stream helpers shared by the dataset, checkpoint and
// particle-state file formats.

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void bytes(const std::vector<std::uint8_t>& b) {
        buf_.insert(buf_.end(), b.begin(), b.end());
    }

    const std::vector<std::uint8_t>& data() const { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    explicit ByteReader(const std::vector<std::uint8_t>& buf) : buf_(buf) {}

    std::uint8_t u8() { return buf_[need(1)]; }
    std::uint32_t u32() {
        std::size_t p = need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[p + i]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::size_t p = need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[p + i]) << (8 * i);
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64() {
        std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        std::uint32_t n = u32();
        std::size_t p = need(n);
        return std::string(buf_.begin() + p, buf_.begin() + p + n);
    }
    std::size_t pos() const { return pos_; }
    bool at_end() const { return pos_ == buf_.size(); }

private:
    std::size_t need(std::size_t n) {
        if (pos_ + n > buf_.size()) throw std::runtime_error("byte stream truncated");
        std::size_t p = pos_;
        pos_ += n;
        return p;
    }
    const std::vector<std::uint8_t>& buf_;
    std::size_t pos_ = 0;
};

inline std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n,
                             std::uint64_t seed = 0xcbf29ce484222325ULL) {
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::vector<std::uint8_t>& b) {
    return fnv1a64(b.data(), b.size());
}

inline std::uint64_t fnv1a64(const std::string& s) {
    return fnv1a64(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
}

std::string base64_encode(const std::vector<std::uint8_t>& data);
std::vector<std::uint8_t> base64_decode(const std::string& text);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);
std::uint64_t file_fnv64(const std::string& path);

}  // namespace defaff
