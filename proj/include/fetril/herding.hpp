#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fetril/types.hpp"

namespace fetril {

struct HerdingResult {
  std::vector<std::size_t> selected_indices;
  /// ||target - running mean|| after each pick; same length as selected_indices.
  std::vector<double> residual_norms;
};

/// Exact greedy herding: at step t picks the unchosen pool row that brings the
/// mean of the t selections closest to `target_mean`, lowest index on ties.
///
/// When `count` exceeds the pool size, availability resets after each full
/// pass over the pool while the running mean keeps accumulating over every
/// selection made so far.
HerdingResult herd(const DenseMatrix& pool, std::span<const double> target_mean, std::size_t count);

}  // namespace fetril
