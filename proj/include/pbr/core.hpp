#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace pbr {

using Vec = std::vector<double>;

// Bad arguments or malformed input supplied by a caller.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Constraints {
  std::optional<double> min;
  std::optional<double> max;
  bool is_int = false;

  void validate() const;
};

struct Hyperparams {
  double delta = 0.5;
  double eta = 2e-3;
  double radius = 0.0;  // 0 selects 100 * m
  bool two_point = false;
  std::size_t max_rounds = 10000;
  std::uint64_t seed = 0;

  void validate() const;
};

// Mixes a parent seed with a key. Used to fork independent streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key);

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  RngStream fork(std::uint64_t key) const { return RngStream(derive_seed(seed_, key)); }

  double uniform(double lo, double hi);
  double normal();
  // Inclusive on both ends.
  long uniform_int(long lo, long hi);
  std::size_t index(std::size_t n);
  bool coin();

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

Vec augment(const Vec& x);
Vec sample_unit_sphere(std::size_t dim, RngStream& rng);
Vec project_ball(Vec w, double radius);
double apply_constraints(double v, const Constraints& c);

double dot(const Vec& a, const Vec& b);
double norm(const Vec& a);
bool all_finite(const Vec& a);

}  // namespace pbr
