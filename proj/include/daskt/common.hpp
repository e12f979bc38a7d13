#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace daskt {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using MatX = Mat<double>;
using VecX = Vec<double>;

// Exit-code classes for the CLI; each pipeline stage failure maps to one.
enum class ErrorClass : int {
  config = 2,
  ingest = 3,
  affect = 4,
  cluster = 5,
  train = 6,
  evaluate = 7,
  consistency = 8,
  export_states = 9,
  internal = 10,
};

class DasktError : public std::runtime_error {
 public:
  DasktError(ErrorClass c, const std::string& msg)
      : std::runtime_error(msg), error_class(c) {}
  ErrorClass error_class;
};

[[noreturn]] inline void fail(ErrorClass c, const std::string& msg) {
  throw DasktError(c, msg);
}

// FNV-1a, used for content-addressed stage caching and seed derivation.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a(s.data(), s.size(), h);
}

std::uint64_t hash_file(const std::string& path);

inline std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

// splitmix64; expands one root seed into independent per-stage streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, const std::string& tag) {
  std::uint64_t s = root ^ fnv1a(tag);
  return splitmix64(s);
}

// Round-trippable float formatting for artifact files.
inline std::string fmt_full(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline std::string fmt_fixed(double v, int digits = 6) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return std::string(buf);
}

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

std::vector<std::string> split(const std::string& s, char delim);
std::string trim(const std::string& s);

}  // namespace daskt
