#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace explab {

/// Seedable random stream. Wraps mt19937_64 and draws through hand-written
/// transforms so sequences do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal via Box-Muller.
  double normal();

  /// Text form of the full generator state, for snapshots.
  std::string serialize() const;
  static Rng deserialize(const std::string& text);

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Deterministically derive an independent seed for a named component
/// stream ("env", "agent", "buffer", ...) from the per-run seed.
std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view stream,
                          std::uint64_t index = 0);

inline Rng make_stream(std::uint64_t run_seed, std::string_view stream,
                       std::uint64_t index = 0) {
  return Rng(derive_seed(run_seed, stream, index));
}

}  // namespace explab
