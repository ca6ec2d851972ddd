#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace dbt {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent streams from a base seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                    std::uint64_t substream = 0) {
  return mix_seed(mix_seed(mix_seed(base) ^ stream) ^ (substream * 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t base, std::uint64_t stream,
                    std::uint64_t substream = 0) {
  return Rng(derive_seed(base, stream, substream));
}

inline Eigen::VectorXd standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = normal(rng);
  return out;
}

}  // namespace dbt
