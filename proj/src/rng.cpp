#include "explab/rng.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace explab {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

std::string Rng::serialize() const {
  std::ostringstream out;
  out << engine_ << ' ' << have_spare_ << ' ' << std::hexfloat << spare_;
  return out.str();
}

Rng Rng::deserialize(const std::string& text) {
  std::istringstream in(text);
  Rng rng;
  std::string spare;
  if (!(in >> rng.engine_ >> rng.have_spare_ >> spare)) throw std::runtime_error("bad rng state");
  rng.spare_ = std::strtod(spare.c_str(), nullptr);
  return rng;
}

std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view stream,
                          std::uint64_t index) {
  return splitmix64(splitmix64(run_seed) ^ fnv1a(stream) ^ splitmix64(index + 0x51ed));
}

}  // namespace explab
