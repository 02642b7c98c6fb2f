#include "dart/rng.hpp"

#include <cmath>

namespace dart {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

uint64_t mix_seed(uint64_t seed, uint64_t id) {
  return splitmix64(seed ^ splitmix64(id + 0x637265616d5f6964ULL));
}

uint64_t hash_name(const char* name) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const char* p = name; *p; ++p) {
    h ^= static_cast<unsigned char>(*p);
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng::Rng(uint64_t seed) : seed_(seed), gen_(splitmix64(seed)) {}

uint64_t Rng::next() { return gen_(); }

double Rng::uniform01() {
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform01();
  } while (u1 <= 0.0);
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

uint64_t Rng::uniform_below(uint64_t n) {
  if (n <= 1) return 0;
  // Rejection below the largest multiple of n to avoid modulo bias.
  const uint64_t threshold = (-n) % n;
  for (;;) {
    const uint64_t r = gen_();
    if (r >= threshold) return r % n;
  }
}

Eigen::VectorXd Rng::normal_vector(int dim) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = normal();
  return v;
}

Rng Rng::stream(uint64_t a) const { return Rng(mix_seed(seed_, a)); }

Rng Rng::stream(uint64_t a, uint64_t b) const {
  return Rng(mix_seed(mix_seed(seed_, a), b));
}

Rng Rng::stream(uint64_t a, uint64_t b, uint64_t c) const {
  return Rng(mix_seed(mix_seed(mix_seed(seed_, a), b), c));
}

}  // namespace dart
