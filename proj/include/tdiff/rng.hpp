#pragma once

#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace tdiff {

/// Identifies one reproducible random stream: replicate `index` of the run
/// seeded with `seed`. Identical (seed, index) pairs give identical draws.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t index = 0;

  RngStream substream(std::uint64_t salt) const noexcept;
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Standard-normal and uniform draws for one stream. Normals use the ziggurat
/// sampler from Boost.Random, which is deterministic across platforms.
class Sampler {
 public:
  explicit Sampler(RngStream stream);

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t bits() { return engine_(); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_;
  boost::random::uniform_01<double> uniform_;
};

}  // namespace tdiff
