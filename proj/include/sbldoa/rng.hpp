#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace sbldoa {

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Seed of an independent stream addressed by (base_seed, indices...). The
// mapping depends only on the key, so trials can run in any order.
std::uint64_t stream_seed(std::uint64_t base_seed,
                          std::initializer_list<std::uint64_t> indices);

using StreamEngine = std::mt19937_64;

inline StreamEngine make_stream(std::uint64_t base_seed,
                                std::initializer_list<std::uint64_t> indices) {
  return StreamEngine(stream_seed(base_seed, indices));
}

}  // namespace sbldoa
