#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <string_view>
#include <system_error>

namespace stlpde {

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_number(double v) {
  if (v == 0.0) return "0";  // folds -0
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Fixed "%.9g" rendering used for CSV output.
inline std::string format_g9(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

/// Parses the whole of `text` as a double; false if anything is left over
/// or the value is not finite.
inline bool parse_double(std::string_view text, double& out) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last && std::isfinite(out);
}

/// SplitMix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seeded generator with a portable uniform mapping (the standard
/// distributions are implementation-defined, the engine is not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(unit() * static_cast<double>(n)) % n;
  }

 private:
  std::mt19937_64 engine_;
};

/// Rounds to `decimals` places and clamps back into [lo, hi].
inline double quantize(double v, int decimals, double lo, double hi) {
  double r;
  if (decimals >= 0) {
    const double scale = std::pow(10.0, decimals);
    r = std::round(v * scale) / scale;
  } else {
    const double scale = std::pow(10.0, -decimals);
    r = std::round(v / scale) * scale;
  }
  if (r < lo) r = lo;
  if (r > hi) r = hi;
  return r;
}

/// Rounds to `digits` significant digits and clamps back into [lo, hi].
inline double quantize_sig(double v, int digits, double lo, double hi) {
  if (v == 0.0) return std::max(lo, std::min(hi, 0.0));
  const int mag = static_cast<int>(std::floor(std::log10(std::fabs(v))));
  return quantize(v, digits - 1 - mag, lo, hi);
}

}  // namespace stlpde
