// fsbdp: command line front end for the stick-breaking profile regression sampler.

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fsbdp/io.hpp"
#include "fsbdp/postprocess.hpp"
#include "fsbdp/runner.hpp"
#include "fsbdp/sampler.hpp"
#include "fsbdp/synthetic.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace fsbdp;

namespace {

struct DataOptions {
  std::string data;
  std::vector<int> categories;
};

struct ModelOptions {
  HyperParams hyper;
  double alpha_fixed = 0.0;
  double alpha_star = 0.0;
  SamplerConfig sampler;
  bool ls1 = true;
  bool ls2 = true;
  bool ls3 = true;
  std::size_t max_laplace_failures = 5;
  CLI::Option* alpha_fixed_opt = nullptr;
  CLI::Option* alpha_star_opt = nullptr;

  void finish() {
    if (alpha_fixed_opt->count() > 0) hyper.alpha_fixed = alpha_fixed;
    if (alpha_star_opt->count() > 0) sampler.alpha_star = alpha_star;
    sampler.moves = {ls1, ls2, ls3};
    hyper.validate();
  }
};

void add_config(CLI::App* app) {
  // Expanded by expand_config before parsing; declared so it shows up in --help.
  app->add_option("--config", "Flat key = value file; keys are long option names, command-line flags win");
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

/// Replace `--config FILE` after a subcommand with the file's entries as
/// `--key=value` arguments. Entries for options also given on the command
/// line are skipped; keys the subcommand does not know are errors.
std::vector<std::string> expand_config(int argc, char** argv, CLI::App& app) {
  std::vector<std::string> args(argv + 1, argv + argc);
  CLI::App* sub = nullptr;
  std::size_t sub_pos = 0;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (CLI::App* candidate = app.get_subcommand_no_throw(args[k])) {
      sub = candidate;
      sub_pos = k;
      break;
    }
  }
  if (sub == nullptr) return args;
  std::vector<std::string> rest(args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1, args.end());
  std::vector<std::string> given;
  std::vector<std::string> files;
  std::vector<std::string> kept;
  for (std::size_t k = 0; k < rest.size(); ++k) {
    const std::string& a = rest[k];
    if (a == "--config" && k + 1 < rest.size()) {
      files.push_back(rest[++k]);
      continue;
    }
    if (a.rfind("--config=", 0) == 0) {
      files.push_back(a.substr(9));
      continue;
    }
    if (a.rfind("--", 0) == 0) given.push_back(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
    kept.push_back(a);
  }
  std::vector<std::string> expanded;
  for (const auto& file : files) {
    std::ifstream in(file);
    if (!in) throw CLI::FileError::Missing(file);
    std::string line;
    for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
      line = trim(line.substr(0, line.find('#')));
      if (line.empty() || line.front() == '[') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw CLI::ConversionError(file + ":" + std::to_string(line_no) + ": expected key = value");
      }
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      std::replace(key.begin(), key.end(), '_', '-');
      if (sub->get_option_no_throw("--" + key) == nullptr || key == "config") {
        throw CLI::ConversionError(file + ":" + std::to_string(line_no) + ": unknown key '" + key + "' for " +
                                   sub->get_name());
      }
      if (value.size() >= 2 && value.front() == '[' && value.back() == ']') {
        value = value.substr(1, value.size() - 2);
        value.erase(std::remove(value.begin(), value.end(), ' '), value.end());
      }
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
      if (std::find(given.begin(), given.end(), key) != given.end()) continue;
      expanded.push_back("--" + key + "=" + value);
    }
  }
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1);
  out.insert(out.end(), expanded.begin(), expanded.end());
  out.insert(out.end(), kept.begin(), kept.end());
  return out;
}

void add_data_options(CLI::App* app, DataOptions& d) {
  app->add_option("--data", d.data, "Data file: header y,x1..xJ[,w1..wL]")->required()->check(CLI::ExistingFile);
  app->add_option("--categories", d.categories, "Number of categories of each covariate, e.g. 2,2,5")
      ->required()
      ->delimiter(',');
}

void add_model_options(CLI::App* app, ModelOptions& m, bool seed_required) {
  auto& h = m.hyper;
  auto& s = m.sampler;
  app->add_option("--dirichlet-a", h.dirichlet_a, "Dirichlet concentration of covariate profiles")->capture_default_str();
  app->add_option("--nu", h.nu, "Degrees of freedom of the t priors on theta and beta")->capture_default_str();
  app->add_option("--sigma-theta", h.sigma_theta, "Scale of the t prior on theta")->capture_default_str();
  app->add_option("--sigma-beta", h.sigma_beta, "Scale of the t prior on beta")->capture_default_str();
  app->add_option("--alpha-shape", h.alpha_shape, "Gamma prior on alpha: shape")->capture_default_str();
  app->add_option("--alpha-rate", h.alpha_rate, "Gamma prior on alpha: rate")->capture_default_str();
  m.alpha_fixed_opt = app->add_option("--alpha-fixed", m.alpha_fixed, "Hold alpha fixed at this value");
  m.alpha_star_opt =
      app->add_option("--alpha-star", m.alpha_star, "Concentration used in the partition prior of the MPP trace");

  app->add_option("--sweeps", s.sweeps, "Total sweeps")->capture_default_str();
  app->add_option("--burnin", s.burnin, "Burn-in sweeps (proposal scales adapt during burn-in)")->capture_default_str();
  app->add_option("--thin", s.thin, "Keep every thin-th sweep after burn-in")->capture_default_str();
  app->add_option("--init-clusters", s.init_clusters, "Initial number of labels")->capture_default_str();
  app->add_option("--mpp-every", s.mpp_every, "Evaluate the log MPP every this many sweeps, 0 = never")
      ->capture_default_str();
  auto* seed = app->add_option("--seed", s.seed, "Random seed");
  if (seed_required) seed->required();
  app->add_option("--adapt-target", s.adapt_target, "Target acceptance rate of the random-walk updates")
      ->capture_default_str();
  app->add_option("--ls1", m.ls1, "Enable label-switching move 1 (swap two labels)")->capture_default_str();
  app->add_option("--ls2", m.ls2, "Enable label-switching move 2 (swap neighbours and sticks)")->capture_default_str();
  app->add_option("--ls3", m.ls3, "Enable label-switching move 3 (expected-weight switch)")->capture_default_str();
  app->add_option("--label-switch-attempts", s.label_switch_attempts, "Attempts of each move per sweep")
      ->capture_default_str();
  const std::map<std::string, LabelMoveMode> modes{{"occupied", LabelMoveMode::occupied}, {"exact", LabelMoveMode::exact}};
  app->add_option("--label-move-mode", s.label_move_mode,
                  "occupied: select among labels up to the largest occupied one; exact: select among all sticks and add the move-3 Jacobian")
      ->transform(CLI::CheckedTransformer(modes, CLI::ignore_case).description(""))
      ->type_name("occupied|exact");
  app->add_flag("--debug-checks", s.debug_checks, "Check every state invariant after each sweep");
  app->add_option("--max-sticks", s.max_sticks, "Abort if the slice needs more sticks than this")->capture_default_str();
  app->add_option("--laplace-max-iterations", s.laplace.max_iterations, "Newton iteration limit")->capture_default_str();
  app->add_option("--laplace-tolerance", s.laplace.gradient_tolerance, "Newton gradient-norm tolerance")
      ->capture_default_str();
  app->add_option("--max-laplace-failures", m.max_laplace_failures,
                  "Exit with an error when more Laplace evaluations than this fail")
      ->capture_default_str();
}

ProfileDataset load(const DataOptions& d) { return read_dataset_csv(d.data, d.categories); }

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + std::to_string(v[k]);
  return out;
}

int cmd_generate(const std::string& which, std::uint64_t seed, const fs::path& out_dir, std::size_t n,
                 std::size_t per_cluster, const std::string& toy) {
  RngStream rng(seed);
  SyntheticDataset synth;
  if (which == "1") {
    synth = generate_dataset1(rng, per_cluster);
  } else if (which == "2") {
    Dataset2Options options;
    options.n = n;
    synth = generate_dataset2(rng, options);
  } else {
    synth = generate_toy(rng, toy);
  }
  fs::create_directories(out_dir);
  write_dataset_csv(out_dir / "data.csv", synth.data);
  write_partition_csv(out_dir / "truth.csv", synth.truth);
  std::ostringstream ini;
  ini << "data = \"" << fs::absolute(out_dir / "data.csv").string() << "\"\n"
      << "categories = [" << join(synth.data.categories()) << "]\n";
  write_text(out_dir / "dataset.toml", ini.str());
  if (!synth.alpha_draws.empty()) {
    std::ofstream out(out_dir / "alpha_draws.csv");
    out << "stick,alpha\n";
    for (std::size_t c = 0; c < synth.alpha_draws.size(); ++c) {
      out << c + 1 << ',' << format_double(synth.alpha_draws[c]) << '\n';
    }
  }
  std::cout << "wrote " << synth.data.size() << " observations to " << (out_dir / "data.csv").string() << '\n';
  return 0;
}

int cmd_postprocess(const std::vector<std::string>& runs, const DataOptions& d, std::size_t k_min, std::size_t k_max,
                    bool no_refine, const std::string& predict_file, const fs::path& out_dir) {
  const ProfileDataset data = load(d);
  SimilarityMatrix s(data.size());
  std::vector<std::vector<int>> all_samples;
  std::vector<PredictiveState> states;
  for (const auto& dir : runs) {
    AllocationSamples samples = read_samples(fs::path(dir) / "z_samples.csv");
    for (const auto& z : samples.z) s.add(z);
    all_samples.insert(all_samples.end(), samples.z.begin(), samples.z.end());
    if (!predict_file.empty()) {
      auto st = read_predictive_states(fs::path(dir) / "states.jsonl");
      states.insert(states.end(), st.begin(), st.end());
    }
  }
  if (s.num_sweeps() == 0) throw std::invalid_argument("the runs contain no retained samples");
  fs::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "similarity.csv");
    out << "i,j,similarity\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
      for (std::size_t j = 0; j <= i; ++j) out << i + 1 << ',' << j + 1 << ',' << format_double(s(i, j)) << '\n';
    }
  }
  const OptimalPartition best = optimal_partition(s, k_min, k_max, !no_refine);
  write_partition_csv(out_dir / "optimal_partition.csv", best.labels);
  std::cout << "optimal partition: " << best.clusters << " clusters, score " << format_double(best.score) << '\n';

  // MAP partition: largest log MPP among retained samples, evaluated afresh
  // with the first run's priors and alpha_star.
  const nlohmann::json meta = nlohmann::json::parse(read_text(fs::path(runs.front()) / "run.json"));
  HyperParams hyper;
  const auto& h = meta.at("hyper");
  hyper.dirichlet_a = h.at("dirichlet_a").get<double>();
  hyper.nu = h.at("nu").get<double>();
  hyper.sigma_theta = h.at("sigma_theta").get<double>();
  hyper.sigma_beta = h.at("sigma_beta").get<double>();
  const double alpha_star = meta.at("alpha_star").get<double>();
  std::vector<double> mpp_values;
  for (const auto& z : all_samples) {
    const MppTerms terms = log_mpp(z, data, hyper, alpha_star);
    mpp_values.push_back(terms.total().value_or(std::nan("")));
  }
  const std::size_t map = map_partition_index(mpp_values);
  write_partition_csv(out_dir / "map_partition.csv", canonical_labels(all_samples[map]));

  if (!predict_file.empty()) {
    std::ifstream in(predict_file);
    if (!in) throw FormatError(predict_file + ": cannot open for reading");
    std::string line;
    std::getline(in, line);
    std::ofstream out(out_dir / "predictions.csv");
    out << "row,p_y1\n";
    std::size_t row = 0;
    const std::size_t J = data.num_covariates();
    const std::size_t L = data.num_fixed_effects();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      ++row;
      std::vector<int> x;
      std::vector<double> w;
      std::stringstream ss(line);
      std::string field;
      for (std::size_t k = 0; std::getline(ss, field, ','); ++k) {
        try {
          if (k < J) {
            x.push_back(std::stoi(field));
          } else {
            w.push_back(std::stod(field));
          }
        } catch (const std::exception&) {
          throw FormatError(predict_file + ":" + std::to_string(row + 1) + ": cannot parse '" + field + "'");
        }
      }
      if (x.size() != J || w.size() != L) {
        throw FormatError(predict_file + ":" + std::to_string(row + 1) + ": expected " + std::to_string(J + L) +
                          " fields");
      }
      out << row << ',' << format_double(predict(x, w, states)) << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stick-breaking Dirichlet process profile regression sampler"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  // generate
  auto* gen = app.add_subcommand("generate", "Write a simulated dataset (1, 2 or toy)");
  std::string which = "1";
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  std::size_t gen_n = 2000;
  std::size_t per_cluster = 200;
  std::string toy = "n8";
  gen->add_option("--dataset", which, "1: five separated clusters; 2: prior-generated; toy")
      ->check(CLI::IsMember({"1", "2", "toy"}))
      ->capture_default_str();
  gen->add_option("--seed", gen_seed, "Random seed")->required();
  gen->add_option("--out-dir", gen_out, "Output directory")->required();
  gen->add_option("--n", gen_n, "Observations (dataset 2)")->capture_default_str();
  gen->add_option("--per-cluster", per_cluster, "Observations per cluster (dataset 1)")->capture_default_str();
  gen->add_option("--toy", toy, "Toy dataset name: n1, n3 or n8")->capture_default_str();

  // run
  auto* run = app.add_subcommand("run", "Run one chain and write its trace, samples and final state");
  add_config(run);
  DataOptions run_data;
  ModelOptions run_model;
  std::string run_out;
  bool run_states = true;
  add_data_options(run, run_data);
  add_model_options(run, run_model, true);
  run->add_option("--out-dir", run_out, "Output directory")->required();
  run->add_option("--write-states", run_states, "Write states.jsonl for prediction")->capture_default_str();

  // multirun
  auto* multi = app.add_subcommand("multirun", "Run a grid of initial cluster counts times repetitions");
  add_config(multi);
  DataOptions multi_data;
  ModelOptions multi_model;
  MultirunOptions multi_opts;
  std::string multi_out;
  add_data_options(multi, multi_data);
  add_model_options(multi, multi_model, true);
  multi->add_option("--init-grid", multi_opts.init_clusters, "Initial cluster counts")->delimiter(',')->capture_default_str();
  multi->add_option("--repetitions", multi_opts.repetitions, "Chains per initial cluster count")->capture_default_str();
  multi->add_option("--workers", multi_opts.workers, "Chains run concurrently")->capture_default_str();
  multi->add_option("--out-dir", multi_out, "Output directory")->required();

  // compare
  auto* cmp = app.add_subcommand("compare", "Compare chains at a shared alpha_star");
  std::vector<std::string> cmp_runs;
  double cmp_alpha = 0.0;
  std::string cmp_out;
  std::size_t early = 500;
  cmp->add_option("runs", cmp_runs, "Run directories")->required()->check(CLI::ExistingDirectory);
  auto* cmp_alpha_opt = cmp->add_option("--alpha-star", cmp_alpha, "Common alpha_star (default: mean posterior alpha)");
  cmp->add_option("--out-dir", cmp_out, "Output directory")->required();
  cmp->add_option("--early-sweeps", early, "Length of the early cluster-count traces")->capture_default_str();

  // postprocess
  auto* post = app.add_subcommand("postprocess", "Similarity matrix, optimal and MAP partitions, predictions");
  add_config(post);
  std::vector<std::string> post_runs;
  DataOptions post_data;
  std::size_t k_min = 1;
  std::size_t k_max = 20;
  bool no_refine = false;
  std::string predict_file;
  std::string post_out;
  post->add_option("--runs", post_runs, "Run directories to pool")->required()->check(CLI::ExistingDirectory);
  add_data_options(post, post_data);
  post->add_option("--k-min", k_min, "Smallest number of medoids tried")->capture_default_str();
  post->add_option("--k-max", k_max, "Largest number of medoids tried")->capture_default_str();
  post->add_flag("--no-refine", no_refine, "Skip single-observation refinement of medoid partitions");
  post->add_option("--predict", predict_file, "Profiles to predict: header x1..xJ[,w1..wL]")->check(CLI::ExistingFile);
  post->add_option("--out-dir", post_out, "Output directory")->required();

  // experiment-move3
  auto* exp = app.add_subcommand("experiment-move3", "Chains with and without move 3: acceptance and alpha spread");
  add_config(exp);
  DataOptions exp_data;
  ModelOptions exp_model;
  Move3ExperimentOptions exp_opts;
  std::string exp_out;
  add_data_options(exp, exp_data);
  add_model_options(exp, exp_model, false);
  exp->add_option("--runs-per-arm", exp_opts.runs_per_arm, "Chains per arm")->capture_default_str();
  exp->add_option("--block", exp_opts.block, "Sweeps per acceptance block")->capture_default_str();
  exp->add_option("--workers", exp_opts.workers, "Chains run concurrently")->capture_default_str();
  exp->add_option("--out-dir", exp_out, "Output directory")->required();

  try {
    std::vector<std::string> args = expand_config(argc, argv, app);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) return cmd_generate(which, gen_seed, gen_out, gen_n, per_cluster, toy);
    if (run->parsed()) {
      run_model.finish();
      const ProfileDataset data = load(run_data);
      RunOutput output{run_out, run_model.max_laplace_failures, run_states};
      const RunSummary summary = run_chain_to_directory(data, run_model.hyper, run_model.sampler, output);
      std::cout << "posterior mean alpha " << format_double(summary.posterior_mean_alpha) << ", Laplace failures "
                << summary.laplace_failures << '\n';
      if (!summary.ok) {
        std::cerr << "error: " << summary.laplace_failures << " Laplace failures exceed the tolerance of "
                  << output.max_laplace_failures << '\n';
        return 3;
      }
      return 0;
    }
    if (multi->parsed()) {
      multi_model.finish();
      multi_opts.base_seed = multi_model.sampler.seed;
      const ProfileDataset data = load(multi_data);
      RunOutput output{multi_out, multi_model.max_laplace_failures, true};
      const auto summaries = run_multichain(data, multi_model.hyper, multi_model.sampler, output, multi_opts);
      int status = 0;
      for (const auto& s : summaries) {
        std::cout << s.out_dir.string() << ": seed " << s.seed << ", posterior mean alpha "
                  << format_double(s.posterior_mean_alpha) << ", Laplace failures " << s.laplace_failures << '\n';
        if (!s.ok) status = 3;
      }
      return status;
    }
    if (cmp->parsed()) {
      std::vector<fs::path> dirs(cmp_runs.begin(), cmp_runs.end());
      std::optional<double> alpha;
      if (cmp_alpha_opt->count() > 0) alpha = cmp_alpha;
      const CompareReport report = compare_chains(dirs, alpha, cmp_out, early);
      std::cout << "common alpha_star " << format_double(report.alpha_star) << '\n';
      for (const auto& c : report.chains) {
        std::cout << c.name << ": mean log MPP " << format_double(c.mean_log_mpp) << " (sd "
                  << format_double(c.sd_log_mpp) << "), median alpha " << format_double(c.alpha_quantiles[2]) << '\n';
      }
      return 0;
    }
    if (post->parsed()) return cmd_postprocess(post_runs, post_data, k_min, k_max, no_refine, predict_file, post_out);
    if (exp->parsed()) {
      exp_model.finish();
      exp_opts.base_seed = exp_model.sampler.seed;
      const ProfileDataset data = load(exp_data);
      const Move3Report report = run_experiment_move3(data, exp_model.hyper, exp_model.sampler, exp_opts, exp_out);
      for (const auto& arm : report.arms) {
        std::cout << arm.name << ": sd of posterior mean alpha across runs " << format_double(arm.alpha_mean_sd) << '\n';
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
