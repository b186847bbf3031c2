#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "cforest/error.hpp"

namespace cforest::io {

static_assert(std::endian::native == std::endian::little, "binary format assumes a little-endian host");

// Little-endian fixed-width primitives. Doubles are stored as raw IEEE-754 bits.
class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    check();
  }

  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
    check();
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put_vector(const std::vector<T>& v) {
    put<std::uint64_t>(v.size());
    if (!v.empty()) os_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
    check();
  }

 private:
  void check() {
    if (!os_) fail(ErrorCode::IoError, "write failed");
  }
  std::ostream& os_;
};

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    T v{};
    is_.read(reinterpret_cast<char*>(&v), sizeof(T));
    check();
    return v;
  }

  std::string get_string() {
    const auto n = length();
    std::string s(n, '\0');
    is_.read(s.data(), static_cast<std::streamsize>(n));
    check();
    return s;
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  std::vector<T> get_vector() {
    const auto n = length();
    std::vector<T> v(n);
    if (n) is_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
    check();
    return v;
  }

 private:
  std::uint64_t length() {
    const auto n = get<std::uint64_t>();
    if (n > (std::uint64_t{1} << 40)) fail(ErrorCode::CorruptBundle, "implausible length prefix");
    return n;
  }
  void check() {
    if (!is_) fail(ErrorCode::CorruptBundle, "unexpected end of stream");
  }
  std::istream& is_;
};

}  // namespace cforest::io
