#pragma once

#include <cstdint>
#include <limits>
#include <span>

#include <Eigen/Core>

namespace bgan {

/// Counter-based random stream.
///
/// Output i of a stream is a pure function of (key, i), so a stream can be
/// split into independent children by hashing a child id into the key.
/// Every chain, noise batch and minibatch shuffle in the library draws from
/// its own child stream; adding chains never shifts another chain's draws.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t seed = 0) : key_(mix(seed ^ 0x2545F4914F6CDD1DULL)) {}

  /// Child stream identified by `id`; independent of the parent's counter.
  Stream split(std::uint64_t id) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  std::uint64_t operator()() { return next_u64(); }
  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return std::numeric_limits<std::uint64_t>::max(); }

  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Standard normal (Box-Muller, both variates used).
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  void fill_normal(std::span<double> out, double stddev = 1.0);
  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev = 1.0);

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace bgan
