#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace opshape {

/// Mixes a 64-bit value with the splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent child seed from a parent seed and a list of tags.
/// Used to fan a single master seed out into per-episode and per-component
/// streams:
///
///   derive_seed(master, {stream_id, index})
///
/// Each tag is folded in with one splitmix64 round, so the mapping is a pure
/// function of its inputs.
std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> tags);

/// Seeded pseudorandom stream. Identical seeds give identical draw sequences.
/// Uniform and normal variates are generated from raw engine bits so the
/// sequence does not depend on the standard library's distribution classes.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed = 0) : engine_(seed) {}

  void reseed(std::uint64_t seed) { engine_.seed(seed); }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform01();

  /// Uniform on the open interval (lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  /// Standard normal via Box-Muller; consumes two uniforms per call.
  double normal();

  std::string serialize() const;
  void deserialize(const std::string& text);

  friend bool operator==(const RngStream& a, const RngStream& b) { return a.engine_ == b.engine_; }

private:
  std::mt19937_64 engine_;
};

}  // namespace opshape
