#include "csfusion/error.hpp"
#include "csfusion/nuisance.hpp"
#include "csfusion/random.hpp"

#include <numeric>
#include <string>

namespace csfusion {

std::vector<Eigen::Index> FoldAssignment::rows_in(int k) const {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if (fold[i] == k) rows.push_back(static_cast<Eigen::Index>(i));
  }
  return rows;
}

std::vector<Eigen::Index> FoldAssignment::rows_outside(int k) const {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if (fold[i] != k) rows.push_back(static_cast<Eigen::Index>(i));
  }
  return rows;
}

FoldAssignment kfold_split(Eigen::Index n, int k_folds, std::uint64_t seed) {
  if (k_folds < 2 || n < k_folds) {
    throw Error(ErrorCode::TooFewObservations,
                "kfold_split needs 2 <= k_folds <= n (n=" + std::to_string(n) +
                    ", k=" + std::to_string(k_folds) + ")");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }
  FoldAssignment out;
  out.n = n;
  out.k_folds = k_folds;
  out.fold.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    out.fold[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % static_cast<std::size_t>(k_folds));
  }
  return out;
}

}  // namespace csfusion
