#include "pbr/core.hpp"

#include <cmath>

namespace pbr {

void Constraints::validate() const {
  if (min && max && *min > *max) throw UsageError("constraint min exceeds max");
  if ((min && !std::isfinite(*min)) || (max && !std::isfinite(*max)))
    throw UsageError("constraint bounds must be finite");
}

void Hyperparams::validate() const {
  if (!(delta > 0) || !std::isfinite(delta)) throw UsageError("delta must be > 0");
  if (!(eta >= 0) || !std::isfinite(eta)) throw UsageError("eta must be >= 0");
  if (!(radius >= 0) || !std::isfinite(radius)) throw UsageError("radius must be > 0, or 0 for the default");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (key + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(derive_seed(seed, 0)) {}

double RngStream::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

double RngStream::normal() { return normal_(engine_); }

long RngStream::uniform_int(long lo, long hi) {
  return std::uniform_int_distribution<long>(lo, hi)(engine_);
}

std::size_t RngStream::index(std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

bool RngStream::coin() { return (engine_() >> 63) != 0; }

Vec augment(const Vec& x) {
  Vec out(x);
  out.push_back(1.0);
  return out;
}

Vec sample_unit_sphere(std::size_t dim, RngStream& rng) {
  if (dim == 0) throw UsageError("sample_unit_sphere: dim must be >= 1");
  Vec u(dim);
  double n = 0.0;
  // a zero draw has probability 0 but would leave u undefined
  while (!(n > 0.0)) {
    for (auto& v : u) v = rng.normal();
    n = norm(u);
  }
  for (auto& v : u) v /= n;
  return u;
}

Vec project_ball(Vec w, double radius) {
  double n = norm(w);
  if (n > radius) {
    double k = radius / n;
    for (auto& v : w) v *= k;
  }
  return w;
}

double apply_constraints(double v, const Constraints& c) {
  if (c.min && v < *c.min) v = *c.min;
  if (c.max && v > *c.max) v = *c.max;
  if (c.is_int) v = std::round(v);
  return v;
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

bool all_finite(const Vec& a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace pbr
