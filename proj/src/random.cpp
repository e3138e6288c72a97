#include "bgan/random.hpp"

#include <cmath>
#include <numbers>

namespace bgan {

std::uint64_t Stream::mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Stream Stream::split(std::uint64_t id) const {
  Stream child;
  child.key_ = mix(key_ ^ mix(id + 0x632BE59BD9B4E019ULL));
  return child;
}

std::uint64_t Stream::next_u64() {
  return mix(key_ + 0x9E3779B97F4A7C15ULL * counter_++);
}

double Stream::uniform() {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Stream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(angle);
  has_spare_ = true;
  return r * std::cos(angle);
}

std::uint64_t Stream::below(std::uint64_t n) {
  // Lemire's multiply-shift with rejection.
  std::uint64_t x = next_u64();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = -n % n;
    while (low < threshold) {
      x = next_u64();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

void Stream::fill_normal(std::span<double> out, double stddev) {
  for (double& v : out) v = stddev * normal();
}

Eigen::MatrixXd Stream::normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev) {
  Eigen::MatrixXd m(rows, cols);
  fill_normal(std::span<double>(m.data(), static_cast<std::size_t>(m.size())), stddev);
  return m;
}

}  // namespace bgan
