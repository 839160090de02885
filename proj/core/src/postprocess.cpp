#include "fsbdp/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>

#include "fsbdp/numeric.hpp"

namespace fsbdp {

SimilarityMatrix::SimilarityMatrix(std::size_t n) : n_(n), counts_(n * (n + 1) / 2, 0) {}

void SimilarityMatrix::add(std::span<const int> z) {
  if (z.size() != n_) throw std::invalid_argument("allocation sample has the wrong length");
  for (std::size_t i = 0; i < n_; ++i) {
    std::uint64_t* row = counts_.data() + i * (i + 1) / 2;
    for (std::size_t j = 0; j <= i; ++j) row[j] += z[i] == z[j] ? 1 : 0;
  }
  ++sweeps_;
}

void SimilarityMatrix::merge(const SimilarityMatrix& other) {
  if (other.n_ != n_) throw std::invalid_argument("cannot merge similarity matrices of different sizes");
  for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += other.counts_[k];
  sweeps_ += other.sweeps_;
}

double SimilarityMatrix::operator()(std::size_t i, std::size_t j) const {
  if (sweeps_ == 0) throw std::logic_error("similarity matrix has no sweeps");
  return static_cast<double>(counts_[index(i, j)]) / static_cast<double>(sweeps_);
}

std::vector<double> SimilarityMatrix::dense() const {
  std::vector<double> out(n_ * n_);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j <= i; ++j) out[i * n_ + j] = out[j * n_ + i] = (*this)(i, j);
  }
  return out;
}

SimilarityMatrix accumulate_similarity(std::span<const std::vector<int>> samples) {
  if (samples.empty()) throw std::invalid_argument("no allocation samples to accumulate");
  SimilarityMatrix s(samples.front().size());
  for (const auto& z : samples) s.add(z);
  return s;
}

std::vector<int> canonical_labels(std::span<const int> z) {
  std::unordered_map<int, int> map;
  std::vector<int> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    auto [it, inserted] = map.emplace(z[i], static_cast<int>(map.size()) + 1);
    out[i] = it->second;
  }
  return out;
}

double partition_score(const SimilarityMatrix& s, std::span<const int> partition) {
  if (partition.size() != s.size()) throw std::invalid_argument("partition has the wrong length");
  double score = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double centred = s(i, j) - 0.5;
      score += partition[i] == partition[j] ? centred : -centred;
    }
  }
  return score;
}

std::vector<int> partition_around_medoids(std::span<const double> d, std::size_t n, std::size_t k) {
  if (d.size() != n * n) throw std::invalid_argument("dissimilarity must be n x n");
  if (k == 0 || k > n) throw std::invalid_argument("k must lie in [1, n]");
  constexpr double inf = std::numeric_limits<double>::infinity();
  auto dist = [&](std::size_t a, std::size_t b) { return d[a * n + b]; };

  // BUILD: greedy medoid selection.
  std::vector<std::size_t> medoids;
  std::vector<char> is_medoid(n, 0);
  std::vector<double> nearest(n, inf);
  for (std::size_t m = 0; m < k; ++m) {
    std::size_t best = n;
    double best_total = inf;
    for (std::size_t h = 0; h < n; ++h) {
      if (is_medoid[h]) continue;
      double total = 0.0;
      for (std::size_t o = 0; o < n; ++o) total += std::min(nearest[o], dist(o, h));
      if (total < best_total) {
        best_total = total;
        best = h;
      }
    }
    medoids.push_back(best);
    is_medoid[best] = 1;
    for (std::size_t o = 0; o < n; ++o) nearest[o] = std::min(nearest[o], dist(o, best));
  }

  // SWAP with shared removal losses: O(n^2 + nk) per pass.
  std::vector<std::size_t> near_idx(n);
  std::vector<double> dn(n);
  std::vector<double> ds(n);
  auto assign = [&] {
    for (std::size_t o = 0; o < n; ++o) {
      dn[o] = ds[o] = inf;
      near_idx[o] = 0;
      for (std::size_t m = 0; m < k; ++m) {
        const double v = dist(o, medoids[m]);
        if (v < dn[o]) {
          ds[o] = dn[o];
          dn[o] = v;
          near_idx[o] = m;
        } else if (v < ds[o]) {
          ds[o] = v;
        }
      }
    }
  };
  assign();
  std::vector<double> delta(k);
  for (int pass = 0; pass < 1000 && k < n; ++pass) {
    std::vector<double> removal(k, 0.0);
    for (std::size_t o = 0; o < n; ++o) {
      if (std::isfinite(ds[o])) removal[near_idx[o]] += ds[o] - dn[o];
    }
    double best = -1e-12;
    std::size_t best_m = k;
    std::size_t best_h = n;
    for (std::size_t h = 0; h < n; ++h) {
      if (is_medoid[h]) continue;
      delta = removal;
      double shared = 0.0;
      for (std::size_t o = 0; o < n; ++o) {
        const double doh = dist(o, h);
        if (doh < dn[o]) {
          shared += doh - dn[o];
          if (std::isfinite(ds[o])) delta[near_idx[o]] += dn[o] - ds[o];
        } else if (doh < ds[o]) {
          delta[near_idx[o]] += doh - ds[o];
        }
      }
      for (std::size_t m = 0; m < k; ++m) {
        const double change = delta[m] + shared;
        if (change < best) {
          best = change;
          best_m = m;
          best_h = h;
        }
      }
    }
    if (best_h == n) break;
    is_medoid[medoids[best_m]] = 0;
    medoids[best_m] = best_h;
    is_medoid[best_h] = 1;
    assign();
  }

  std::vector<int> labels(n);
  for (std::size_t o = 0; o < n; ++o) labels[o] = static_cast<int>(near_idx[o]) + 1;
  for (std::size_t m = 0; m < k; ++m) labels[medoids[m]] = static_cast<int>(m) + 1;
  return labels;
}

std::vector<int> refine_partition(const SimilarityMatrix& s, std::span<const int> partition) {
  const std::size_t n = s.size();
  if (partition.size() != n) throw std::invalid_argument("partition has the wrong length");
  std::vector<int> labels = canonical_labels(partition);
  int clusters = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
  // affinity[i][c] = sum_{j in c, j != i} (S_ij - 1/2); one spare column for a new cluster.
  std::vector<std::vector<double>> affinity(n, std::vector<double>(static_cast<std::size_t>(clusters) + 1, 0.0));
  std::vector<int> sizes(static_cast<std::size_t>(clusters) + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    ++sizes[static_cast<std::size_t>(labels[i])];
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) affinity[i][static_cast<std::size_t>(labels[j])] += s(i, j) - 0.5;
    }
  }
  for (bool improved = true; improved;) {
    improved = false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto from = static_cast<std::size_t>(labels[i]);
      double best_gain = 1e-12;
      std::size_t best = from;
      std::size_t empty = 0;
      for (std::size_t c = 1; c < sizes.size(); ++c) {
        if (c == from) continue;
        if (sizes[c] == 0) {
          if (empty == 0) empty = c;
          continue;
        }
        const double gain = 2.0 * (affinity[i][c] - affinity[i][from]);
        if (gain > best_gain) {
          best_gain = gain;
          best = c;
        }
      }
      if (sizes[from] > 1) {
        const double gain = -2.0 * affinity[i][from];
        if (gain > best_gain) {
          best_gain = gain;
          if (empty == 0) {
            sizes.push_back(0);
            for (auto& row : affinity) row.push_back(0.0);
            empty = sizes.size() - 1;
          }
          best = empty;
        }
      }
      if (best == from) continue;
      improved = true;
      --sizes[from];
      ++sizes[best];
      labels[i] = static_cast<int>(best);
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double v = s(i, j) - 0.5;
        affinity[j][from] -= v;
        affinity[j][best] += v;
      }
    }
  }
  return canonical_labels(labels);
}

OptimalPartition optimal_partition(const SimilarityMatrix& s, std::size_t k_min, std::size_t k_max, bool refine) {
  const std::size_t n = s.size();
  if (k_min < 1) k_min = 1;
  k_max = std::min(k_max, n);
  if (n == 0 || k_min > k_max) throw std::invalid_argument("empty range of cluster counts");
  const std::vector<double> dissimilarity = [&] {
    std::vector<double> dense = s.dense();
    for (double& v : dense) v = 1.0 - v;
    return dense;
  }();
  OptimalPartition best;
  best.score = -std::numeric_limits<double>::infinity();
  for (std::size_t k = k_min; k <= k_max; ++k) {
    std::vector<int> labels = canonical_labels(partition_around_medoids(dissimilarity, n, k));
    if (refine) labels = refine_partition(s, labels);
    const double score = partition_score(s, labels);
    best.candidate_scores.push_back(score);
    if (score > best.score) {
      best.score = score;
      best.labels = std::move(labels);
    }
  }
  best.clusters = best.labels.empty() ? 0 : static_cast<std::size_t>(*std::max_element(best.labels.begin(), best.labels.end()));
  return best;
}

std::size_t map_partition_index(std::span<const double> log_mpp) {
  std::size_t best = log_mpp.size();
  for (std::size_t t = 0; t < log_mpp.size(); ++t) {
    if (std::isnan(log_mpp[t])) continue;
    if (best == log_mpp.size() || log_mpp[t] > log_mpp[best]) best = t;
  }
  if (best == log_mpp.size()) throw std::invalid_argument("no partition has a log MPP value");
  return best;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("partitions differ in length");
  const std::vector<int> ca = canonical_labels(a);
  const std::vector<int> cb = canonical_labels(b);
  const std::size_t ka = ca.empty() ? 0 : static_cast<std::size_t>(*std::max_element(ca.begin(), ca.end()));
  const std::size_t kb = cb.empty() ? 0 : static_cast<std::size_t>(*std::max_element(cb.begin(), cb.end()));
  std::vector<double> table(ka * kb, 0.0);
  std::vector<double> rows(ka, 0.0);
  std::vector<double> cols(kb, 0.0);
  for (std::size_t i = 0; i < ca.size(); ++i) {
    const auto r = static_cast<std::size_t>(ca[i] - 1);
    const auto c = static_cast<std::size_t>(cb[i] - 1);
    table[r * kb + c] += 1.0;
    rows[r] += 1.0;
    cols[c] += 1.0;
  }
  auto pairs = [](double m) { return m * (m - 1.0) / 2.0; };
  double index = 0.0;
  for (double v : table) index += pairs(v);
  double sum_rows = 0.0;
  for (double v : rows) sum_rows += pairs(v);
  double sum_cols = 0.0;
  for (double v : cols) sum_cols += pairs(v);
  const double total = pairs(static_cast<double>(ca.size()));
  if (total == 0.0) return 1.0;
  const double expected = sum_rows * sum_cols / total;
  const double maximum = 0.5 * (sum_rows + sum_cols);
  if (maximum == expected) return 1.0;
  return (index - expected) / (maximum - expected);
}

double predict(std::span<const int> x, std::span<const double> w, std::span<const PredictiveState> sweeps) {
  if (sweeps.empty()) throw std::invalid_argument("no sweeps to predict from");
  double total = 0.0;
  std::vector<std::pair<double, double>> terms;
  std::vector<double> log_weights;
  for (const PredictiveState& s : sweeps) {
    if (s.psi.size() != s.clusters.size() || s.psi.empty()) throw std::invalid_argument("malformed predictive state");
    if (w.size() != s.beta.size()) throw std::invalid_argument("fixed-effect vector has the wrong length");
    double fixed = 0.0;
    for (std::size_t l = 0; l < w.size(); ++l) fixed += s.beta[l] * w[l];
    terms.clear();
    for (std::size_t c = 0; c < s.psi.size(); ++c) {
      const ClusterParams& params = s.clusters[c];
      if (x.size() != params.phi.size()) throw std::invalid_argument("covariate profile has the wrong length");
      double lw = std::log(s.psi[c]);
      for (std::size_t j = 0; j < x.size(); ++j) {
        if (x[j] < 0 || static_cast<std::size_t>(x[j]) >= params.phi[j].size()) {
          throw std::invalid_argument("covariate " + std::to_string(j + 1) + " category " + std::to_string(x[j]) +
                                      " is out of range");
        }
        lw += std::log(std::max(params.phi[j][static_cast<std::size_t>(x[j])], 1e-300));
      }
      terms.emplace_back(lw, logistic(params.theta + fixed));
    }
    // Sorting makes the floating-point sums independent of the labelling.
    std::sort(terms.begin(), terms.end());
    log_weights.clear();
    for (const auto& t : terms) log_weights.push_back(t.first);
    const double norm = log_sum_exp(log_weights);
    double p = 0.0;
    for (const auto& t : terms) p += std::exp(t.first - norm) * t.second;
    total += p;
  }
  return total / static_cast<double>(sweeps.size());
}

}  // namespace fsbdp
