#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fsbdp/model.hpp"

namespace fsbdp {

/// Posterior co-clustering frequencies. Stores integer co-occurrence counts
/// (lower triangle with diagonal), so partial matrices from several chains
/// merge exactly.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  explicit SimilarityMatrix(std::size_t n);

  std::size_t size() const noexcept { return n_; }
  std::uint64_t num_sweeps() const noexcept { return sweeps_; }

  void add(std::span<const int> z);
  void merge(const SimilarityMatrix& other);

  std::uint64_t count(std::size_t i, std::size_t j) const { return counts_[index(i, j)]; }
  /// count / sweeps; throws std::logic_error when no sweep has been added.
  double operator()(std::size_t i, std::size_t j) const;

  /// Row-major dense copy of the similarities.
  std::vector<double> dense() const;

 private:
  static std::size_t index(std::size_t i, std::size_t j) {
    if (i < j) std::swap(i, j);
    return i * (i + 1) / 2 + j;
  }

  std::size_t n_ = 0;
  std::uint64_t sweeps_ = 0;
  std::vector<std::uint64_t> counts_;
};

/// Throws std::invalid_argument on an empty sample set or ragged samples.
SimilarityMatrix accumulate_similarity(std::span<const std::vector<int>> samples);

/// Relabel so clusters are numbered 1, 2, ... in order of first appearance.
std::vector<int> canonical_labels(std::span<const int> z);

/// sum_{i<j} (2 [i ~ j] - 1) (S_ij - 1/2); larger is better.
double partition_score(const SimilarityMatrix& s, std::span<const int> partition);

/// k-medoids (BUILD then SWAP) on a row-major n x n dissimilarity.
/// Returns 1-based cluster labels in order of medoid selection.
std::vector<int> partition_around_medoids(std::span<const double> dissimilarity, std::size_t n, std::size_t k);

/// Greedy single-observation reassignment (including to a new cluster)
/// while partition_score increases.
std::vector<int> refine_partition(const SimilarityMatrix& s, std::span<const int> partition);

struct OptimalPartition {
  std::vector<int> labels;
  std::size_t clusters = 0;
  double score = 0.0;
  /// Score of the candidate for each k in the requested range.
  std::vector<double> candidate_scores;
};

/// Medoid clustering of 1 - S for each k in [k_min, k_max] (k_max clipped to n),
/// each candidate optionally refined, best score kept with ties going to the
/// smaller k. Throws std::invalid_argument when the range is empty.
OptimalPartition optimal_partition(const SimilarityMatrix& s, std::size_t k_min, std::size_t k_max,
                                   bool refine = true);

/// Index of the sample with the largest log MPP, skipping absent values.
/// Throws std::invalid_argument when none is present.
std::size_t map_partition_index(std::span<const double> log_mpp);

double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

/// What prediction needs from one retained sweep.
struct PredictiveState {
  std::vector<double> psi;
  std::vector<ClusterParams> clusters;
  std::vector<double> beta;
};

/// Rao-Blackwellised P(Y = 1 | x, w): mean over sweeps of sum_c q_c logistic(theta_c + beta^T w),
/// q_c proportional to psi_c prod_j Phi_{c,j,x_j} over instantiated sticks. The
/// unrepresented tail mass is ignored.
double predict(std::span<const int> x, std::span<const double> w, std::span<const PredictiveState> sweeps);

}  // namespace fsbdp
