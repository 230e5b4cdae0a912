#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace diresa {

/// Little-endian byte serialization into a growable buffer.
struct ByteWriter {
    std::vector<std::uint8_t> bytes;

    void put_u32(std::uint32_t v);
    void put_u64(std::uint64_t v);
    void put_f64(double v);
    void put_raw(const void* data, std::size_t len);
    void put_str(const std::string& s) { put_raw(s.data(), s.size()); }
};

/// Little-endian reader tracking the byte offset for error reports. All
/// failures throw FormatError carrying the offending offset.
struct ByteReader {
    const std::vector<std::uint8_t>& bytes;
    std::size_t offset = 0;

    explicit ByteReader(const std::vector<std::uint8_t>& b) : bytes(b) {}

    std::uint32_t get_u32();
    std::uint64_t get_u64();
    double get_f64();
    std::string get_str(std::size_t len);
    void expect_magic(const char* magic, std::size_t len);
    bool exhausted() const { return offset == bytes.size(); }

private:
    void need(std::size_t count) const;
};

/// Whole-file helpers. Writing goes through a temp file plus atomic rename.
std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& bytes);
void write_file_atomic(const std::string& path, const std::string& text);

/// FNV-1a checksum of a file's bytes, as fixed-width hex.
std::string file_checksum_hex(const std::string& path);
std::string checksum_hex(std::uint64_t checksum);

} // namespace diresa
