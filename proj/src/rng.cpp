#include "svp/rng.hpp"

namespace svp {

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t trial_seed(std::uint64_t master, std::uint64_t index,
                         std::uint64_t stream) noexcept {
  std::uint64_t state = master;
  std::uint64_t key = splitmix64(state) ^ stream;
  key = splitmix64(key) ^ index;
  return splitmix64(key);
}

std::mt19937_64 trial_engine(std::uint64_t master, std::uint64_t index, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(trial_seed(master, index, stream)),
                    static_cast<std::uint32_t>(trial_seed(master, index, stream) >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace svp
