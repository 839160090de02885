#include "fsbdp/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <set>
#include <stdexcept>
#include <thread>

#include "fsbdp/distributions.hpp"
#include "fsbdp/io.hpp"
#include "json.hpp"

namespace fsbdp {

namespace {

using nlohmann::json;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json hyper_json(const HyperParams& h) {
  json j{{"dirichlet_a", h.dirichlet_a}, {"nu", h.nu},           {"sigma_theta", h.sigma_theta},
         {"sigma_beta", h.sigma_beta},   {"alpha_shape", h.alpha_shape}, {"alpha_rate", h.alpha_rate}};
  j["alpha_fixed"] = h.alpha_fixed ? json(*h.alpha_fixed) : json(nullptr);
  return j;
}

/// Run jobs 0..count-1 on up to `workers` threads; the first exception is rethrown.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& job) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < count; k = next++) {
      try {
        job(k);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (unsigned t = 0; t < workers; ++t) threads.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

bool is_retained(const SamplerConfig& config, std::uint64_t sweep) {
  return sweep > config.burnin && (sweep - config.burnin) % config.thin == 0;
}

PredictiveState predictive_state(const ChainState& state) {
  return PredictiveState{state.psi(), state.clusters(), state.beta};
}

ChainResult run_chain(const ProfileDataset& data, const HyperParams& hyper, const SamplerConfig& config,
                      const ChainOptions& options) {
  config.validate();
  hyper.validate();
  RngStream rng(config.seed);
  ChainResult result;
  result.final_state = initialise_state(data, hyper, config.init_clusters, rng);
  ChainState& state = result.final_state;
  double alpha_sum = 0.0;
  double alpha_all = 0.0;
  for (std::uint64_t t = 1; t <= config.sweeps; ++t) {
    const SweepRecord record = sweep(state, data, hyper, config, rng);
    alpha_all += record.alpha;
    if (t > config.burnin) alpha_sum += record.alpha;
    if (record.laplace_failed) ++result.laplace_failures;
    const bool retained = is_retained(config, t);
    if (retained) {
      if (options.keep_samples) {
        result.sample_sweeps.push_back(t);
        result.samples.push_back(state.z);
      }
      if (options.keep_states) result.states.push_back(predictive_state(state));
    }
    if (options.on_sweep) options.on_sweep(record, state, retained);
    if (options.keep_records) result.records.push_back(record);
  }
  if (config.sweeps > config.burnin) {
    result.posterior_mean_alpha = alpha_sum / static_cast<double>(config.sweeps - config.burnin);
  } else if (config.sweeps > 0) {
    result.posterior_mean_alpha = alpha_all / static_cast<double>(config.sweeps);
  }
  return result;
}

RunSummary run_chain_to_directory(const ProfileDataset& data, const HyperParams& hyper, const SamplerConfig& config,
                                  const RunOutput& output) {
  if (output.out_dir.empty()) throw std::invalid_argument("an output directory is required");
  std::filesystem::create_directories(output.out_dir);
  TraceWriter trace(output.out_dir / "trace.csv");
  SampleWriter samples(output.out_dir / "z_samples.csv", data.size());
  std::ofstream states;
  if (output.write_states) {
    states.open(output.out_dir / "states.jsonl", std::ios::trunc);
    if (!states) throw std::runtime_error((output.out_dir / "states.jsonl").string() + ": cannot open for writing");
  }
  std::size_t retained_count = 0;
  ChainOptions options;
  options.keep_records = false;
  options.keep_samples = false;
  options.on_sweep = [&](const SweepRecord& record, const ChainState& state, bool retained) {
    trace.write(trace_row(record));
    if (!retained) return;
    samples.write(record.sweep, state.z);
    if (output.write_states) {
      states << predictive_state_json(record.sweep, predictive_state(state)) << '\n';
      if (++retained_count % 100 == 0) states.flush();
    }
  };
  const ChainResult result = run_chain(data, hyper, config, options);
  trace.flush();
  samples.flush();
  if (output.write_states) states.flush();
  write_text(output.out_dir / "final_state.json", chain_state_json(result.final_state));

  RunSummary summary;
  summary.out_dir = output.out_dir;
  summary.seed = config.seed;
  summary.init_clusters = config.init_clusters;
  summary.posterior_mean_alpha = result.posterior_mean_alpha;
  summary.laplace_failures = result.laplace_failures;
  summary.ok = result.laplace_failures <= output.max_laplace_failures;

  json meta{{"seed", config.seed},
            {"init_clusters", config.init_clusters},
            {"n", data.size()},
            {"fingerprint", hex64(data.fingerprint())},
            {"sweeps", config.sweeps},
            {"burnin", config.burnin},
            {"thin", config.thin},
            {"mpp_every", config.mpp_every},
            {"alpha_star", resolve_alpha_star(config, hyper)},
            {"posterior_mean_alpha", result.posterior_mean_alpha},
            {"laplace_failures", result.laplace_failures},
            {"max_laplace_failures", output.max_laplace_failures},
            {"moves", config.moves},
            {"label_move_mode", config.label_move_mode == LabelMoveMode::occupied ? "occupied" : "exact"},
            {"hyper", hyper_json(hyper)}};
  write_text(output.out_dir / "run.json", meta.dump(1) + "\n");
  return summary;
}

std::uint64_t derive_seed(std::uint64_t base_seed, int init_clusters, int rep) {
  const std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(init_clusters)) << 32) |
                            static_cast<std::uint32_t>(rep);
  return mix_seed(base_seed ^ mix_seed(key + 0x9e3779b97f4a7c15ULL));
}

std::vector<RunSummary> run_multichain(const ProfileDataset& data, const HyperParams& hyper,
                                       const SamplerConfig& config, const RunOutput& output,
                                       const MultirunOptions& options) {
  if (options.init_clusters.empty()) throw std::invalid_argument("no initial cluster counts given");
  if (options.repetitions < 1) throw std::invalid_argument("repetitions must be positive");
  struct Job {
    int init;
    int rep;
  };
  std::vector<Job> jobs;
  for (int init : options.init_clusters) {
    for (int rep = 0; rep < options.repetitions; ++rep) jobs.push_back({init, rep});
  }
  std::vector<RunSummary> summaries(jobs.size());
  parallel_for(jobs.size(), options.workers, [&](std::size_t k) {
    SamplerConfig chain = config;
    chain.init_clusters = jobs[k].init;
    chain.seed = derive_seed(options.base_seed, jobs[k].init, jobs[k].rep);
    RunOutput out = output;
    out.out_dir = output.out_dir / ("init" + std::to_string(jobs[k].init) + "_rep" + std::to_string(jobs[k].rep));
    summaries[k] = run_chain_to_directory(data, hyper, chain, out);
  });
  return summaries;
}

double sample_quantile(std::vector<double> values, double p) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

CompareReport compare_chains(const std::vector<std::filesystem::path>& run_dirs, std::optional<double> alpha_star,
                             const std::filesystem::path& out_dir, std::size_t early_sweeps) {
  if (run_dirs.empty()) throw std::invalid_argument("no run directories to compare");
  struct Loaded {
    json meta;
    std::vector<TraceRow> trace;
  };
  std::vector<Loaded> runs;
  for (const auto& dir : run_dirs) {
    Loaded run;
    try {
      run.meta = json::parse(read_text(dir / "run.json"));
    } catch (const json::exception& e) {
      throw FormatError((dir / "run.json").string() + ": " + e.what());
    }
    run.trace = read_trace(dir / "trace.csv");
    runs.push_back(std::move(run));
  }
  const std::string fingerprint = runs.front().meta.at("fingerprint").get<std::string>();
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].meta.at("fingerprint").get<std::string>() != fingerprint) {
      throw std::invalid_argument("runs " + run_dirs.front().string() + " and " + run_dirs[r].string() +
                                  " were fitted to different datasets");
    }
  }

  CompareReport report;
  if (alpha_star) {
    report.alpha_star = *alpha_star;
  } else {
    double sum = 0.0;
    for (const auto& run : runs) sum += run.meta.at("posterior_mean_alpha").get<double>();
    report.alpha_star = sum / static_cast<double>(runs.size());
  }
  if (!(report.alpha_star > 0.0)) throw std::invalid_argument("common alpha_star must be positive");

  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& run = runs[r];
    const auto n = run.meta.at("n").get<std::size_t>();
    const auto burnin = run.meta.at("burnin").get<std::uint64_t>();
    ChainSummary chain;
    chain.name = run_dirs[r].filename().string();
    if (chain.name.empty()) chain.name = run_dirs[r].parent_path().filename().string();
    chain.init_clusters = run.meta.at("init_clusters").get<int>();
    chain.seed = run.meta.at("seed").get<std::uint64_t>();
    std::vector<double> mpp;
    std::vector<double> alpha;
    for (const TraceRow& row : run.trace) {
      if (chain.early_clusters.size() < early_sweeps) chain.early_clusters.push_back(row.occupied);
      if (row.log_mpp && row.log_prior) {
        const double prior = rescale_log_partition_prior(*row.log_prior, n, row.occupied, row.alpha_star, report.alpha_star);
        const double value = *row.log_mpp - *row.log_prior + prior;
        chain.log_mpp_trace.emplace_back(row.sweep, value);
        if (row.sweep > burnin) mpp.push_back(value);
      }
      if (row.sweep > burnin) {
        alpha.push_back(row.alpha);
        ++chain.cluster_histogram[row.occupied];
      }
    }
    chain.mpp_count = mpp.size();
    chain.mean_log_mpp = mean(mpp);
    chain.sd_log_mpp = sample_sd(mpp);
    chain.mean_alpha = mean(alpha);
    const std::array<double, 5> probs{0.025, 0.25, 0.5, 0.75, 0.975};
    for (std::size_t q = 0; q < probs.size(); ++q) chain.alpha_quantiles[q] = sample_quantile(alpha, probs[q]);
    report.chains.push_back(std::move(chain));
  }

  if (out_dir.empty()) return report;
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "summary.csv");
    out << "run,init_clusters,seed,alpha_star,mpp_count,mean_log_mpp,sd_log_mpp,mean_alpha,"
           "alpha_q025,alpha_q25,alpha_q50,alpha_q75,alpha_q975\n";
    for (const auto& c : report.chains) {
      out << c.name << ',' << c.init_clusters << ',' << c.seed << ',' << format_double(report.alpha_star) << ','
          << c.mpp_count << ',' << format_double(c.mean_log_mpp) << ',' << format_double(c.sd_log_mpp) << ','
          << format_double(c.mean_alpha);
      for (double q : c.alpha_quantiles) out << ',' << format_double(q);
      out << '\n';
    }
  }
  {
    std::map<int, std::vector<const ChainSummary*>> by_init;
    for (const auto& c : report.chains) by_init[c.init_clusters].push_back(&c);
    std::ofstream out(out_dir / "summary_by_init.csv");
    out << "init_clusters,chains,mean_log_mpp,sd_between_chains,mean_alpha\n";
    for (const auto& [init, chains] : by_init) {
      std::vector<double> means;
      std::vector<double> alphas;
      for (const auto* c : chains) {
        means.push_back(c->mean_log_mpp);
        alphas.push_back(c->mean_alpha);
      }
      out << init << ',' << chains.size() << ',' << format_double(mean(means)) << ',' << format_double(sample_sd(means))
          << ',' << format_double(mean(alphas)) << '\n';
    }
  }
  {
    std::ofstream out(out_dir / "cluster_histogram.csv");
    out << "run,init_clusters,n_clusters,sweeps\n";
    for (const auto& c : report.chains) {
      for (const auto& [k, count] : c.cluster_histogram) {
        out << c.name << ',' << c.init_clusters << ',' << k << ',' << count << '\n';
      }
    }
  }
  {
    std::ofstream out(out_dir / "cluster_trace.csv");
    out << "sweep";
    std::size_t rows = 0;
    for (const auto& c : report.chains) {
      out << ',' << c.name;
      rows = std::max(rows, c.early_clusters.size());
    }
    out << '\n';
    for (std::size_t t = 0; t < rows; ++t) {
      out << t + 1;
      for (const auto& c : report.chains) {
        out << ',';
        if (t < c.early_clusters.size()) {
          out << c.early_clusters[t];
        } else {
          out << "NA";
        }
      }
      out << '\n';
    }
  }
  {
    std::ofstream out(out_dir / "mpp_trace.csv");
    out << "run,init_clusters,sweep,log_mpp\n";
    for (const auto& c : report.chains) {
      for (const auto& [t, v] : c.log_mpp_trace) {
        out << c.name << ',' << c.init_clusters << ',' << t << ',' << format_double(v) << '\n';
      }
    }
  }
  return report;
}

SlopeTest slope_test(const std::vector<double>& x, const std::vector<double>& y) {
  SlopeTest test;
  test.points = x.size();
  if (x.size() != y.size()) throw std::invalid_argument("slope_test: x and y differ in length");
  if (x.size() < 3) return test;
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  if (sxx == 0.0) return test;
  test.slope = sxy / sxx;
  double rss = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double r = y[k] - my - test.slope * (x[k] - mx);
    rss += r * r;
  }
  test.standard_error = std::sqrt(rss / static_cast<double>(x.size() - 2) / sxx);
  if (test.standard_error > 0.0) {
    // P(Z <= z) under a zero slope.
    test.p_negative = 0.5 * std::erfc(-(test.slope / test.standard_error) / std::sqrt(2.0));
  } else {
    test.p_negative = test.slope < 0.0 ? 0.0 : 1.0;
  }
  return test;
}

Move3Report run_experiment_move3(const ProfileDataset& data, const HyperParams& hyper, const SamplerConfig& config,
                                 const Move3ExperimentOptions& options, const std::filesystem::path& out_dir) {
  if (options.runs_per_arm < 1) throw std::invalid_argument("runs_per_arm must be positive");
  if (options.block < 1) throw std::invalid_argument("block must be positive");
  Move3Report report;
  report.arms[0].name = "moves_1_2";
  report.arms[0].moves = {config.moves[0], config.moves[1], false};
  report.arms[1].name = "moves_1_2_3";
  report.arms[1].moves = {config.moves[0], config.moves[1], true};
  if (!config.moves[0] && !config.moves[1] && !config.moves[2]) report.arms[1].moves[2] = false;

  const std::size_t runs = static_cast<std::size_t>(options.runs_per_arm);
  for (auto& arm : report.arms) {
    arm.alpha_means.assign(runs, 0.0);
    arm.acceptance.assign(runs, {});
  }
  std::vector<std::vector<double>> alpha_samples(2 * runs);
  parallel_for(2 * runs, options.workers, [&](std::size_t k) {
    ExperimentArm& arm = report.arms[k / runs];
    const std::size_t run = k % runs;
    SamplerConfig chain = config;
    chain.moves = arm.moves;
    // Both arms share seeds run by run.
    chain.seed = derive_seed(options.base_seed, chain.init_clusters, static_cast<int>(run));
    std::array<int, 3> tried{};
    std::array<int, 3> accepted{};
    std::array<std::vector<double>, 3>& series = arm.acceptance[run];
    std::vector<double>& alphas = alpha_samples[k];
    ChainOptions opts;
    opts.keep_records = false;
    opts.keep_samples = false;
    opts.on_sweep = [&](const SweepRecord& record, const ChainState&, bool) {
      for (std::size_t m = 0; m < 3; ++m) {
        tried[m] += record.moves[m].attempted;
        accepted[m] += record.moves[m].accepted;
      }
      if (record.sweep % options.block == 0) {
        for (std::size_t m = 0; m < 3; ++m) {
          if (arm.moves[m] && tried[m] > 0) series[m].push_back(static_cast<double>(accepted[m]) / tried[m]);
          tried[m] = accepted[m] = 0;
        }
      }
      if (record.sweep > chain.burnin) alphas.push_back(record.alpha);
    };
    const ChainResult result = run_chain(data, hyper, chain, opts);
    arm.alpha_means[run] = result.posterior_mean_alpha;
  });

  for (std::size_t a = 0; a < 2; ++a) {
    ExperimentArm& arm = report.arms[a];
    arm.alpha_mean_sd = sample_sd(arm.alpha_means);
    for (std::size_t run = 0; run < runs; ++run) {
      const auto& s = alpha_samples[a * runs + run];
      arm.pooled_alpha.insert(arm.pooled_alpha.end(), s.begin(), s.end());
    }
    for (std::size_t m = 0; m < 3; ++m) {
      std::vector<double> x;
      std::vector<double> y;
      for (const auto& series : arm.acceptance) {
        for (std::size_t b = 0; b < series[m].size(); ++b) {
          x.push_back(static_cast<double>(b + 1));
          y.push_back(series[m][b]);
        }
      }
      arm.slopes[m] = slope_test(x, y);
    }
  }

  if (out_dir.empty()) return report;
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "acceptance.csv");
    out << "arm,run,move,block,end_sweep,acceptance\n";
    for (const auto& arm : report.arms) {
      for (std::size_t run = 0; run < runs; ++run) {
        for (std::size_t m = 0; m < 3; ++m) {
          const auto& s = arm.acceptance[run][m];
          for (std::size_t b = 0; b < s.size(); ++b) {
            out << arm.name << ',' << run << ',' << m + 1 << ',' << b + 1 << ',' << (b + 1) * options.block << ','
                << format_double(s[b]) << '\n';
          }
        }
      }
    }
  }
  {
    std::ofstream out(out_dir / "alpha_means.csv");
    out << "arm,run,posterior_mean_alpha\n";
    for (const auto& arm : report.arms) {
      for (std::size_t run = 0; run < runs; ++run) {
        out << arm.name << ',' << run << ',' << format_double(arm.alpha_means[run]) << '\n';
      }
    }
  }
  {
    double lo = hyper.alpha_fixed ? *hyper.alpha_fixed : 0.0;
    double hi = lo;
    for (const auto& arm : report.arms) {
      for (double v : arm.pooled_alpha) hi = std::max(hi, v);
    }
    hi = hi > lo ? hi * 1.05 : lo + 1.0;
    const double width = (hi - lo) / static_cast<double>(options.density_bins);
    std::ofstream out(out_dir / "alpha_density.csv");
    out << "alpha,prior_density";
    for (const auto& arm : report.arms) out << ',' << arm.name;
    out << '\n';
    std::array<std::vector<double>, 2> density;
    for (std::size_t a = 0; a < 2; ++a) {
      density[a].assign(options.density_bins, 0.0);
      for (double v : report.arms[a].pooled_alpha) {
        const auto bin = std::min(options.density_bins - 1, static_cast<std::size_t>((v - lo) / width));
        density[a][bin] += 1.0;
      }
      const double total = static_cast<double>(report.arms[a].pooled_alpha.size());
      for (double& d : density[a]) d = total > 0.0 ? d / (total * width) : 0.0;
    }
    for (std::size_t b = 0; b < options.density_bins; ++b) {
      const double centre = lo + (static_cast<double>(b) + 0.5) * width;
      const double prior = hyper.alpha_fixed || centre <= 0.0
                               ? 0.0
                               : std::exp(log_density_gamma(centre, hyper.alpha_shape, hyper.alpha_rate));
      out << format_double(centre) << ',' << format_double(prior) << ',' << format_double(density[0][b]) << ','
          << format_double(density[1][b]) << '\n';
    }
  }
  {
    std::ofstream out(out_dir / "report.csv");
    out << "arm,alpha_mean_of_means,alpha_mean_sd,move,blocks,slope,slope_se,p_negative_slope\n";
    for (const auto& arm : report.arms) {
      for (std::size_t m = 0; m < 3; ++m) {
        out << arm.name << ',' << format_double(mean(arm.alpha_means)) << ',' << format_double(arm.alpha_mean_sd) << ','
            << m + 1 << ',' << arm.slopes[m].points << ',' << format_double(arm.slopes[m].slope) << ','
            << format_double(arm.slopes[m].standard_error) << ',' << format_double(arm.slopes[m].p_negative) << '\n';
      }
    }
  }
  return report;
}

}  // namespace fsbdp
