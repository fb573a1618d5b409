#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace heavyball {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Iterates left the region where the method is stable (non-finite
/// coordinate or norm above the blow-up threshold).
class DivergedError : public std::runtime_error {
 public:
  DivergedError(int iter, const std::string& what)
      : std::runtime_error("diverged at iteration " + std::to_string(iter) + ": " + what),
        iter_(iter) {}
  int iter() const { return iter_; }

 private:
  int iter_;
};

/// Input failed a structural precondition (asymmetric Gram matrix,
/// inadmissible schedule, bad dimensions, ...). The message names the check.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

constexpr double kDivergenceNormCap = 1e12;

// SplitMix64. Used both as a seed scrambler and to derive independent
// per-cell streams in sweeps: adding cells never perturbs existing ones.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Seed for sweep cell `ordinal` under a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t ordinal) {
  return splitmix64(master ^ splitmix64(ordinal + 1));
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64(splitmix64(seed));
}

/// m-by-n matrix with i.i.d. N(0,1) entries, deterministic per engine state.
Matrix gaussian_matrix(int rows, int cols, std::mt19937_64& eng);

/// Haar-distributed matrix with orthonormal columns (rows >= cols): QR of a
/// Gaussian matrix with the R-diagonal sign correction.
Matrix haar_orthonormal_columns(int rows, int cols, std::mt19937_64& eng);

}  // namespace heavyball
