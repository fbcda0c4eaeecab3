#pragma once
// Seeded randomness helpers. Every stochastic routine takes an explicit seed or
// engine; distributions are constructed per call so the engine state alone
// determines all future draws (needed for bit-exact checkpoint resume).

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace graphrcg {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream seed for (master, a, b), e.g. (seed, graph index).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(master) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

inline double uniform01(Engine& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double standard_normal(Engine& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline int uniform_int(Engine& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline Eigen::VectorXd standard_normal_vector(Engine& rng, Eigen::Index dim) {
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = standard_normal(rng);
  return v;
}

// Inverse-CDF draw from unnormalized non-negative weights.
template <typename Weights>
int sample_categorical(const Weights& w, Engine& rng) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < w.size(); ++k) total += w[k];
  if (!(total > 0.0)) throw std::runtime_error("sample_categorical: zero total weight");
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    acc += w[k];
    if (u < acc) return static_cast<int>(k);
  }
  for (Eigen::Index k = w.size() - 1; k >= 0; --k) {
    if (w[k] > 0.0) return static_cast<int>(k);
  }
  return 0;
}

inline std::string engine_state(const Engine& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline Engine engine_from_state(const std::string& state) {
  Engine rng;
  std::istringstream is(state);
  is >> rng;
  if (is.fail()) throw std::runtime_error("corrupt RNG state");
  return rng;
}

}  // namespace graphrcg
