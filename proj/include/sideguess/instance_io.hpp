#pragma once

// Instance files: one problem per file, `key = value` lines where each value
// is a JSON literal and may span lines until its brackets close. '#' starts
// a comment. Keys:
//
//   x_alphabet, y_alphabet, xhat_alphabet   symbol lists (strings or numbers)
//   p_xy                                    |X| rows of |Y| probabilities
//   distortion                              |X| rows of |Xhat| entries
//   D, rho, R                               reals

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sideguess/exponent.hpp"

namespace sideguess {

/// Malformed or invalid instance. Messages carry the line, or the matrix
/// coordinates as key[row][col] with 0-based indices.
struct InstanceError : StructuralError {
  using StructuralError::StructuralError;
};

struct InstanceFile {
  std::vector<std::string> x_alphabet, y_alphabet, xhat_alphabet;
  std::vector<std::vector<double>> p_xy, distortion;
  double D = 0.0;
  double rho = 1.0;
  double R = 0.0;

  [[nodiscard]] ProblemSpec to_spec() const;
  /// The spec's (pruned, renormalized) arrays; equal to the source file up to
  /// renormalization round-off.
  static InstanceFile from_spec(const ProblemSpec& spec);
};

/// Parses and validates everything, so to_spec() on the result cannot throw.
InstanceFile parse_instance(std::string_view text);
InstanceFile load_instance(const std::filesystem::path& path);
/// Numbers are written with %.17g, so parse_instance(dump_instance(f))
/// reproduces f exactly.
std::string dump_instance(const InstanceFile& f);

}  // namespace sideguess
