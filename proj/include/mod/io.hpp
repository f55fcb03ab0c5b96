#ifndef MOD_IO_HPP
#define MOD_IO_HPP

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mod/common.hpp"

namespace mod {

// Little-endian binary writer/reader. x86/arm64 hosts are little-endian;
// byte order is fixed by memcpy of the native representation on such hosts.
class BinaryWriter {
  public:
    explicit BinaryWriter(const std::filesystem::path& path)
        : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw FormatError("cannot open for writing: " + path.string());
    }

    template <typename T>
    void write(T value) {
        static_assert(std::is_trivially_copyable_v<T>);
        out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
    }

    void write_bytes(const void* data, std::size_t len) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    }

    void write_string_u16(const std::string& s) {
        if (s.size() > 0xffff) throw FormatError("string too long for u16 prefix");
        write<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
        write_bytes(s.data(), s.size());
    }

    void close() {
        out_.close();
        if (!out_) throw FormatError("write failed: " + path_.string());
    }

  private:
    std::filesystem::path path_;
    std::ofstream out_;
};

class BinaryReader {
  public:
    explicit BinaryReader(const std::filesystem::path& path)
        : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw FormatError("cannot open for reading: " + path.string());
    }

    template <typename T>
    T read() {
        static_assert(std::is_trivially_copyable_v<T>);
        T value{};
        in_.read(reinterpret_cast<char*>(&value), sizeof(T));
        if (in_.gcount() != static_cast<std::streamsize>(sizeof(T))) fail_truncated();
        offset_ += sizeof(T);
        return value;
    }

    void read_bytes(void* data, std::size_t len) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
        if (in_.gcount() != static_cast<std::streamsize>(len)) fail_truncated();
        offset_ += len;
    }

    std::string read_string_u16() {
        const auto len = read<std::uint16_t>();
        std::string s(len, '\0');
        if (len) read_bytes(s.data(), len);
        return s;
    }

    std::uint64_t offset() const { return offset_; }

    [[noreturn]] void fail(const std::string& why) const {
        throw FormatError(why + " in " + path_.string() + " at byte offset " +
                          std::to_string(offset_));
    }

  private:
    [[noreturn]] void fail_truncated() const { fail("truncated file"); }

    std::filesystem::path path_;
    std::ifstream in_;
    std::uint64_t offset_ = 0;
};

// Write-then-rename so readers never observe a partial file.
inline void atomic_write_text(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot open for writing: " + tmp);
        out << content;
        if (!out) throw FormatError("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open for reading: " + path.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return content;
}

}  // namespace mod

#endif  // MOD_IO_HPP
