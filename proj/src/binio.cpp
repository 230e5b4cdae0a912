#include "diresa/binio.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "diresa/errors.hpp"
#include "diresa/rng.hpp"

namespace diresa {

void ByteWriter::put_u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::put_u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::put_f64(double v) {
    put_u64(std::bit_cast<std::uint64_t>(v));
}

void ByteWriter::put_raw(const void* data, std::size_t len) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes.insert(bytes.end(), p, p + len);
}

void ByteReader::need(std::size_t count) const {
    if (offset + count > bytes.size()) {
        throw FormatError("truncated file, needed " + std::to_string(count) + " more bytes",
                          offset);
    }
}

std::uint32_t ByteReader::get_u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
    offset += 4;
    return v;
}

std::uint64_t ByteReader::get_u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[offset + i]) << (8 * i);
    offset += 8;
    return v;
}

double ByteReader::get_f64() {
    return std::bit_cast<double>(get_u64());
}

std::string ByteReader::get_str(std::size_t len) {
    need(len);
    std::string s(reinterpret_cast<const char*>(bytes.data()) + offset, len);
    offset += len;
    return s;
}

void ByteReader::expect_magic(const char* magic, std::size_t len) {
    const std::size_t at = offset;
    need(len);
    for (std::size_t i = 0; i < len; ++i) {
        if (bytes[at + i] != static_cast<std::uint8_t>(magic[i])) {
            throw FormatError("bad magic, expected \"" + std::string(magic, len) + "\"", at);
        }
    }
    offset += len;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path + " for reading");
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    if (size < 0) throw IoError("cannot size " + path);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    in.seekg(0);
    if (size > 0) in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in) throw IoError("short read on " + path);
    return bytes;
}

namespace {

void write_atomic_impl(const std::string& path, const void* data, std::size_t len) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp + " for writing");
        if (len > 0) out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
        out.flush();
        if (!out) throw IoError("short write on " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

} // namespace

void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    write_atomic_impl(path, bytes.data(), bytes.size());
}

void write_file_atomic(const std::string& path, const std::string& text) {
    write_atomic_impl(path, text.data(), text.size());
}

std::string checksum_hex(std::uint64_t checksum) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(checksum));
    return std::string(buf);
}

std::string file_checksum_hex(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    return checksum_hex(fnv1a64(bytes.data(), bytes.size()));
}

} // namespace diresa
