#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "fsbdp/model.hpp"
#include "fsbdp/postprocess.hpp"

namespace fsbdp {

/// Any malformed input file; the message names the file and line.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Data files: header `y,x1,...,xJ,w1,...,wL`, one row per observation,
/// covariates as 0-based integers, fixed effects as decimals.
void write_dataset_csv(const std::filesystem::path& path, const ProfileDataset& data);
/// `categories` must have one entry per x column; the number of fixed effects
/// is taken from the header.
ProfileDataset read_dataset_csv(const std::filesystem::path& path, const std::vector<int>& categories);

/// `observation,cluster` with 1-based observation numbers.
void write_partition_csv(const std::filesystem::path& path, const std::vector<int>& labels);
std::vector<int> read_partition_csv(const std::filesystem::path& path);

/// %.17g, which reads back to the same double.
std::string format_double(double value);

struct TraceRow {
  std::uint64_t sweep = 0;
  double alpha = 0.0;
  std::size_t occupied = 0;
  std::size_t sticks = 0;
  double alpha_star = 0.0;
  std::optional<double> log_covariate;
  std::optional<double> log_response;
  std::optional<double> log_prior;
  std::optional<double> log_mpp;
  /// Accepted count per move, absent when the move was not attempted.
  std::array<std::optional<int>, 3> accepted{};
  std::array<int, 3> attempted{};
};

TraceRow trace_row(const SweepRecord& record);

/// Per-sweep trace, appended row by row and flushed every `flush_every` rows.
class TraceWriter {
 public:
  explicit TraceWriter(const std::filesystem::path& path, std::size_t flush_every = 100);
  void write(const TraceRow& row);
  void flush();

 private:
  std::ofstream out_;
  std::size_t flush_every_;
  std::size_t pending_ = 0;
};

std::vector<TraceRow> read_trace(const std::filesystem::path& path);

/// Retained allocations: `sweep,z1,...,zn`.
class SampleWriter {
 public:
  SampleWriter(const std::filesystem::path& path, std::size_t n, std::size_t flush_every = 100);
  void write(std::uint64_t sweep, const std::vector<int>& z);
  void flush();

 private:
  std::ofstream out_;
  std::size_t n_;
  std::size_t flush_every_;
  std::size_t pending_ = 0;
};

struct AllocationSamples {
  std::vector<std::uint64_t> sweeps;
  std::vector<std::vector<int>> z;
};
AllocationSamples read_samples(const std::filesystem::path& path);

/// One JSON object per retained sweep carrying what prediction needs.
std::string predictive_state_json(std::uint64_t sweep, const PredictiveState& state);
std::vector<PredictiveState> read_predictive_states(const std::filesystem::path& path);

/// Full chain state as JSON (z, sticks, cluster parameters, beta, alpha,
/// proposal scales), and back.
std::string chain_state_json(const ChainState& state);
ChainState chain_state_from_json(const std::string& text);

/// Writes `text` to `path`, replacing any existing file.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace fsbdp
