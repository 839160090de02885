#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fsbdp/model.hpp"
#include "fsbdp/postprocess.hpp"
#include "fsbdp/sampler.hpp"

namespace fsbdp {

/// A sweep is retained when it is past burn-in and (sweep - burnin) is a multiple of thin.
bool is_retained(const SamplerConfig& config, std::uint64_t sweep);

struct ChainResult {
  std::vector<SweepRecord> records;
  std::vector<std::uint64_t> sample_sweeps;
  std::vector<std::vector<int>> samples;
  std::vector<PredictiveState> states;
  ChainState final_state;
  /// Mean of alpha over sweeps after burn-in (over all sweeps when there are none).
  double posterior_mean_alpha = 0.0;
  std::size_t laplace_failures = 0;
};

struct ChainOptions {
  bool keep_records = true;
  bool keep_samples = true;
  bool keep_states = false;
  /// Called after every sweep; `retained` marks thinned post-burn-in sweeps.
  std::function<void(const SweepRecord&, const ChainState&, bool retained)> on_sweep;
};

PredictiveState predictive_state(const ChainState& state);

/// Runs one chain from config.seed.
ChainResult run_chain(const ProfileDataset& data, const HyperParams& hyper, const SamplerConfig& config,
                      const ChainOptions& options = {});

struct RunOutput {
  std::filesystem::path out_dir;
  /// Runs with more failed Laplace evaluations than this are reported as failed.
  std::size_t max_laplace_failures = 5;
  bool write_states = true;
};

struct RunSummary {
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  int init_clusters = 0;
  double posterior_mean_alpha = 0.0;
  std::size_t laplace_failures = 0;
  bool ok = true;
};

/// Writes trace.csv, z_samples.csv, states.jsonl, final_state.json and run.json into out_dir.
RunSummary run_chain_to_directory(const ProfileDataset& data, const HyperParams& hyper, const SamplerConfig& config,
                                  const RunOutput& output);

/// Seed for repetition `rep` of the chain started with `init_clusters` labels.
std::uint64_t derive_seed(std::uint64_t base_seed, int init_clusters, int rep);

struct MultirunOptions {
  std::vector<int> init_clusters{1, 5, 10, 30};
  int repetitions = 1;
  std::uint64_t base_seed = 0;
  unsigned workers = 1;
};

/// Every (init_clusters, repetition) pair as its own chain, written to
/// out_dir/init<k>_rep<r>. Chains are independent of the worker count.
std::vector<RunSummary> run_multichain(const ProfileDataset& data, const HyperParams& hyper,
                                       const SamplerConfig& config, const RunOutput& output,
                                       const MultirunOptions& options);

/// Type-7 (linear interpolation) sample quantile; `values` need not be sorted.
double sample_quantile(std::vector<double> values, double p);

struct ChainSummary {
  std::string name;
  int init_clusters = 0;
  std::uint64_t seed = 0;
  std::size_t mpp_count = 0;
  double mean_log_mpp = 0.0;
  double sd_log_mpp = 0.0;
  double mean_alpha = 0.0;
  /// 2.5, 25, 50, 75 and 97.5 percent quantiles of alpha after burn-in.
  std::array<double, 5> alpha_quantiles{};
  /// Post-burn-in sweeps per number of occupied clusters.
  std::map<std::size_t, std::size_t> cluster_histogram;
  std::vector<std::size_t> early_clusters;
  std::vector<std::pair<std::uint64_t, double>> log_mpp_trace;
};

struct CompareReport {
  double alpha_star = 0.0;
  std::vector<ChainSummary> chains;
};

/// Reads run directories written by run_chain_to_directory, refuses chains
/// on different datasets, re-evaluates every log MPP at a shared alpha_star
/// (default: mean of the chains' posterior mean alpha) and summarises them.
/// When out_dir is non-empty, writes summary.csv, summary_by_init.csv,
/// cluster_histogram.csv, cluster_trace.csv and mpp_trace.csv there.
CompareReport compare_chains(const std::vector<std::filesystem::path>& run_dirs, std::optional<double> alpha_star,
                             const std::filesystem::path& out_dir, std::size_t early_sweeps = 500);

struct Move3ExperimentOptions {
  int runs_per_arm = 10;
  std::uint64_t block = 500;
  std::uint64_t base_seed = 0;
  unsigned workers = 1;
  std::size_t density_bins = 60;
};

struct SlopeTest {
  double slope = 0.0;
  double standard_error = 0.0;
  /// One-sided normal-approximation p value for a negative slope.
  double p_negative = 1.0;
  std::size_t points = 0;
};

struct ExperimentArm {
  std::string name;
  std::array<bool, 3> moves{};
  std::vector<double> alpha_means;
  double alpha_mean_sd = 0.0;
  std::vector<double> pooled_alpha;
  /// acceptance[run][move] = accepted / attempted per block, empty when the move is off.
  std::vector<std::array<std::vector<double>, 3>> acceptance;
  std::array<SlopeTest, 3> slopes{};
};

struct Move3Report {
  std::array<ExperimentArm, 2> arms;
};

/// Ordinary least-squares slope of y on x.
SlopeTest slope_test(const std::vector<double>& x, const std::vector<double>& y);

/// Runs `runs_per_arm` chains with moves 1 and 2 only and as many with all
/// three moves (the move flags in `config` are overridden), then summarises
/// acceptance per block and the alpha posterior. Writes acceptance.csv,
/// alpha_means.csv, alpha_density.csv and report.csv when out_dir is non-empty.
Move3Report run_experiment_move3(const ProfileDataset& data, const HyperParams& hyper, const SamplerConfig& config,
                                 const Move3ExperimentOptions& options, const std::filesystem::path& out_dir);

}  // namespace fsbdp
