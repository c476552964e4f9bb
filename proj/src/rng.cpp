#include "mams/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace mams {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t a,
                            std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ mix64(a));
  h = mix64(h ^ mix64(b));
  h = mix64(h ^ mix64(c));
  return h;
}

double RngStream::exponential() {
  double e;
  do {
    e = -std::log(uniform_pos());
  } while (e == 0.0);
  return e;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform01() - 1.0;
    v = 2.0 * uniform01() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

double RngStream::gamma(double shape) {
  if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be > 0");
  if (shape < 1.0) {
    // boost to shape+1 and scale back
    const double u = uniform_pos();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_pos();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double RngStream::truncated_normal_lower(double mu, double sigma,
                                         double lower) {
  if (!(sigma > 0.0))
    throw std::invalid_argument("truncated_normal_lower: sigma must be > 0");
  const double a = (lower - mu) / sigma;
  double z;
  if (a < 0.45) {
    do {
      z = normal();
    } while (z <= a);
  } else {
    const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (;;) {
      z = a + exponential() / alpha;
      const double diff = z - alpha;
      if (z > a && std::log(uniform_pos()) <= -0.5 * diff * diff) break;
    }
  }
  return mu + sigma * z;
}

std::uint64_t RngStream::bounded(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("bounded: n must be > 0");
  const std::uint64_t threshold = (-n) % n;
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x >= threshold) return x % n;
  }
}

}  // namespace mams
