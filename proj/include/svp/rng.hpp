#pragma once

#include <cstdint>
#include <random>

namespace svp {

// One step of the splitmix64 generator: advances state and returns the
// mixed output.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

// Seed for work item `index` of stream `stream` under `master`. Pure
// function of its arguments, so any item can be regenerated in isolation.
std::uint64_t trial_seed(std::uint64_t master, std::uint64_t index,
                         std::uint64_t stream = 0) noexcept;

std::mt19937_64 trial_engine(std::uint64_t master, std::uint64_t index,
                             std::uint64_t stream = 0);

}  // namespace svp
