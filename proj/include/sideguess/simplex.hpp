#pragma once

// Derivative-free local search and helpers for optimizing over products of
// probability simplices.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace sideguess {

struct NelderMeadOptions {
  int max_evaluations = 2000;
  double initial_step = 0.1;
  /// Stop when the simplex's value spread and diameter are both below these.
  double f_tolerance = 1e-10;
  double x_tolerance = 1e-8;
  /// Number of times the simplex is rebuilt around the best vertex after it
  /// first converges.
  int restarts = 1;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

using Objective = std::function<double(std::span<const double>)>;

/// Minimizes f starting from x0. Non-finite values are treated as +infinity.
NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0, const NelderMeadOptions& opts);

/// Counter-based RNG stream: identical (seed, stream) pairs give identical
/// sequences regardless of which thread draws them.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream);

/// Draw from Dirichlet(1, ..., 1), i.e. uniform on the simplex.
std::vector<double> dirichlet_uniform(std::size_t k, std::mt19937_64& rng);

/// A block of free coordinates that maps onto one PMF of size k. The first
/// k - 1 entries are free; the last is 1 - sum. Points off the simplex are
/// projected back.
struct SimplexBlock {
  std::size_t size;  // k
};

/// Free coordinates for a list of PMFs laid end to end.
std::vector<double> to_free_coordinates(std::span<const double> pmfs, std::span<const SimplexBlock> blocks);
/// Inverse of to_free_coordinates with projection onto each simplex.
std::vector<double> from_free_coordinates(std::span<const double> free, std::span<const SimplexBlock> blocks);

}  // namespace sideguess
