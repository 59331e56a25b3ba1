#include "tdiff/rng.hpp"

#include <array>

namespace tdiff {

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RngStream RngStream::substream(std::uint64_t salt) const noexcept {
  std::uint64_t s = seed ^ (0xd1b54a32d192ed03ULL * (salt + 1));
  return {splitmix64(s), index};
}

namespace {

std::mt19937_64 seeded_engine(RngStream stream) {
  std::uint64_t state = stream.seed;
  std::uint64_t mixed = splitmix64(state);
  state = mixed ^ (stream.index * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
  std::array<std::uint32_t, 8> words{};
  for (std::size_t i = 0; i < words.size(); i += 2) {
    const std::uint64_t w = splitmix64(state);
    words[i] = static_cast<std::uint32_t>(w);
    words[i + 1] = static_cast<std::uint32_t>(w >> 32);
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace

Sampler::Sampler(RngStream stream) : engine_(seeded_engine(stream)) {}

}  // namespace tdiff
