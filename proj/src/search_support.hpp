#pragma once

// Shared pieces of the nested searches: the rate-constraint retraction and
// simplex-block bookkeeping.

#include <span>
#include <vector>

#include "sideguess/simplex.hpp"

namespace sideguess::detail {

/// I(Y; U) for the joint Q_Y(y) rows(y, u).
double mutual_info_rows(std::span<const double> q_y, std::span<const double> rows, std::size_t nu);

/// Moves rows toward the kernel that makes U independent of Y (every row
/// equal to the U-marginal) until I(Y; U) <= rate. Returns the mutual
/// information before the move. The result satisfies I <= rate exactly
/// (bisection keeps the feasible end).
double retract_to_rate(std::span<const double> q_y, std::span<double> rows, std::size_t nu, double rate);

/// ny blocks of size nu.
std::vector<SimplexBlock> row_blocks(std::size_t ny, std::size_t nu);

/// Q(y, u) = q_y(y) rows(y, u).
void joint_from_rows(std::span<const double> q_y, std::span<const double> rows, std::size_t nu, std::span<double> out);

/// Rows that copy y into u (u = y), padded with zeros for the extra letters.
std::vector<double> copy_rows(std::size_t ny, std::size_t nu);

}  // namespace sideguess::detail
