#pragma once

// Little-endian byte buffers shared by the binary file formats.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <type_traits>

#include "lvo/error.hpp"

namespace lvo::detail {

template <class T>
T byteswap(T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

class ByteWriter {
 public:
  void raw(std::string_view bytes) { buf_.append(bytes); }

  template <class T>
  void put(T value, std::endian order = std::endian::little) {
    static_assert(std::is_arithmetic_v<T>);
    if (order != std::endian::native) value = byteswap(value);
    char tmp[sizeof(T)];
    std::memcpy(tmp, &value, sizeof(T));
    buf_.append(tmp, sizeof(T));
  }

  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string name)
      : bytes_(bytes), name_(std::move(name)) {}

  std::string_view raw(std::size_t n) {
    require(n);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  template <class T>
  T get(std::endian order = std::endian::little) {
    static_assert(std::is_arithmetic_v<T>);
    require(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    if (order != std::endian::native) value = byteswap(value);
    return value;
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::string& name() const { return name_; }

 private:
  void require(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(name_ + ": truncated (needed " + std::to_string(n) +
                       " bytes at offset " + std::to_string(pos_) + ")");
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::string name_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path.string());
  return data;
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace lvo::detail
