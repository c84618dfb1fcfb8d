#include "fetril/herding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fetril/errors.hpp"

namespace fetril {

HerdingResult herd(const DenseMatrix& pool, std::span<const double> target_mean, std::size_t count) {
  if (pool.rows() == 0) throw ContractError("herding", "empty candidate pool");
  if (count == 0) throw ContractError("herding", "selection size must be at least 1");
  if (pool.cols() != target_mean.size()) throw ContractError("herding", "target dimension does not match pool");

  const std::size_t n = pool.rows();
  const std::size_t d = pool.cols();
  HerdingResult result;
  result.selected_indices.reserve(count);
  result.residual_norms.reserve(count);

  std::vector<double> running_sum(d, 0.0);
  std::vector<bool> taken(n, false);
  std::size_t taken_in_round = 0;

  for (std::size_t step = 1; step <= count; ++step) {
    if (taken_in_round == n) {
      std::fill(taken.begin(), taken.end(), false);
      taken_in_round = 0;
    }
    const double inv_t = 1.0 / static_cast<double>(step);
    std::size_t best = n;
    double best_sq = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      auto x = pool.row(i);
      double sq = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = target_mean[j] - (running_sum[j] + x[j]) * inv_t;
        sq += diff * diff;
      }
      if (sq < best_sq) {
        best_sq = sq;
        best = i;
      }
    }
    taken[best] = true;
    ++taken_in_round;
    auto x = pool.row(best);
    for (std::size_t j = 0; j < d; ++j) running_sum[j] += x[j];
    result.selected_indices.push_back(best);
    result.residual_norms.push_back(std::sqrt(best_sq));
  }
  return result;
}

}  // namespace fetril
