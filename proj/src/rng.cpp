#include "opshape/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace opshape {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(parent);
  for (std::uint64_t tag : tags) h = splitmix64(h ^ splitmix64(tag + 0x632BE59BD9B4E019ULL));
  return h;
}

double RngStream::uniform01() {
  // 53 random mantissa bits, shifted by half an ulp so 0 is never produced.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

std::size_t RngStream::index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("RngStream::index: empty range");
  // Lemire's nearly-divisionless bounded draw with rejection.
  const std::uint64_t range = n;
  const std::uint64_t threshold = (0 - range) % range;
  for (;;) {
    const std::uint64_t x = engine_();
    const unsigned __int128 m = static_cast<unsigned __int128>(x) * range;
    if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::size_t>(m >> 64);
  }
}

double RngStream::normal() {
  const double u1 = uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string RngStream::serialize() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void RngStream::deserialize(const std::string& text) {
  std::istringstream is(text);
  is >> engine_;
  if (!is) throw std::runtime_error("RngStream: malformed serialized state");
}

}  // namespace opshape
