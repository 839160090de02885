#include "fsbdp/io.hpp"

#include <charconv>
#include <cstdio>
#include "json.hpp"
#include <sstream>

namespace fsbdp {

namespace {

using nlohmann::json;

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

template <typename T>
T parse_number(std::string_view field, const std::filesystem::path& path, std::size_t line, const char* what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw FormatError(where(path, line) + "cannot parse " + what + " '" + std::string(field) + "'");
  }
  return value;
}

std::optional<double> parse_optional(std::string_view field, const std::filesystem::path& path, std::size_t line,
                                     const char* what) {
  if (field == "NA") return std::nullopt;
  return parse_number<double>(field, path, line, what);
}

std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  return out;
}

json cluster_json(const ClusterParams& params) { return json{{"theta", params.theta}, {"phi", params.phi}}; }

ClusterParams cluster_from_json(const json& j) {
  ClusterParams params;
  params.theta = j.at("theta").get<double>();
  params.phi = j.at("phi").get<std::vector<std::vector<double>>>();
  return params;
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_dataset_csv(const std::filesystem::path& path, const ProfileDataset& data) {
  std::ofstream out = open_out(path);
  out << 'y';
  for (std::size_t j = 0; j < data.num_covariates(); ++j) out << ",x" << j + 1;
  for (std::size_t l = 0; l < data.num_fixed_effects(); ++l) out << ",w" << l + 1;
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.y(i);
    for (int x : data.x_row(i)) out << ',' << x;
    for (double w : data.w_row(i)) out << ',' << format_double(w);
    out << '\n';
  }
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

ProfileDataset read_dataset_csv(const std::filesystem::path& path, const std::vector<int>& categories) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(where(path, 1) + "missing header");
  const auto header = split(line);
  if (header.empty() || header[0] != "y") throw FormatError(where(path, 1) + "first column must be 'y'");
  std::size_t J = 0;
  std::size_t L = 0;
  for (std::size_t k = 1; k < header.size(); ++k) {
    const std::string expected_x = "x" + std::to_string(J + 1);
    const std::string expected_w = "w" + std::to_string(L + 1);
    if (L == 0 && header[k] == expected_x) {
      ++J;
    } else if (header[k] == expected_w) {
      ++L;
    } else {
      throw FormatError(where(path, 1) + "unexpected column '" + std::string(header[k]) + "', expected '" +
                        (L == 0 ? expected_x + "' or '" : "") + expected_w + "'");
    }
  }
  if (J != categories.size()) {
    throw FormatError(where(path, 1) + "header has " + std::to_string(J) + " covariates but " +
                      std::to_string(categories.size()) + " category counts were declared");
  }
  std::vector<int> x;
  std::vector<int> y;
  std::vector<double> w;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split(line);
    if (fields.size() != 1 + J + L) {
      throw FormatError(where(path, line_no) + "expected " + std::to_string(1 + J + L) + " fields, found " +
                        std::to_string(fields.size()));
    }
    const int yi = parse_number<int>(fields[0], path, line_no, "response");
    if (yi != 0 && yi != 1) throw FormatError(where(path, line_no) + "response must be 0 or 1");
    y.push_back(yi);
    for (std::size_t j = 0; j < J; ++j) {
      const int v = parse_number<int>(fields[1 + j], path, line_no, "covariate");
      if (v < 0 || v >= categories[j]) {
        throw FormatError(where(path, line_no) + "covariate x" + std::to_string(j + 1) + " = " + std::to_string(v) +
                          " outside [0, " + std::to_string(categories[j]) + ")");
      }
      x.push_back(v);
    }
    for (std::size_t l = 0; l < L; ++l) w.push_back(parse_number<double>(fields[1 + J + l], path, line_no, "fixed effect"));
  }
  try {
    return ProfileDataset(categories, L, std::move(x), std::move(y), std::move(w));
  } catch (const std::invalid_argument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_partition_csv(const std::filesystem::path& path, const std::vector<int>& labels) {
  std::ofstream out = open_out(path);
  out << "observation,cluster\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out << i + 1 << ',' << labels[i] << '\n';
}

std::vector<int> read_partition_csv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  std::getline(in, line);
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != 2) throw FormatError(where(path, line_no) + "expected 2 fields");
    labels.push_back(parse_number<int>(fields[1], path, line_no, "cluster"));
  }
  return labels;
}

TraceRow trace_row(const SweepRecord& record) {
  TraceRow row;
  row.sweep = record.sweep;
  row.alpha = record.alpha;
  row.occupied = record.occupied;
  row.sticks = record.sticks;
  row.alpha_star = record.alpha_star;
  row.log_covariate = record.log_covariate;
  row.log_response = record.log_response;
  row.log_prior = record.log_prior;
  row.log_mpp = record.log_mpp;
  for (std::size_t m = 0; m < 3; ++m) {
    row.attempted[m] = record.moves[m].attempted;
    if (record.moves[m].attempted > 0) row.accepted[m] = record.moves[m].accepted;
  }
  return row;
}

TraceWriter::TraceWriter(const std::filesystem::path& path, std::size_t flush_every)
    : out_(open_out(path)), flush_every_(flush_every) {
  out_ << "sweep,alpha,n_clusters,sticks,alpha_star,log_covariate,log_response,log_prior,log_mpp,"
          "ls1_tried,ls1,ls2_tried,ls2,ls3_tried,ls3\n";
}

void TraceWriter::write(const TraceRow& row) {
  out_ << row.sweep << ',' << format_double(row.alpha) << ',' << row.occupied << ',' << row.sticks << ','
       << format_double(row.alpha_star) << ',' << format_optional(row.log_covariate) << ','
       << format_optional(row.log_response) << ',' << format_optional(row.log_prior) << ','
       << format_optional(row.log_mpp);
  for (std::size_t m = 0; m < 3; ++m) {
    out_ << ',' << row.attempted[m] << ',';
    if (row.accepted[m]) {
      out_ << *row.accepted[m];
    } else {
      out_ << "NA";
    }
  }
  out_ << '\n';
  if (++pending_ >= flush_every_) flush();
}

void TraceWriter::flush() {
  out_.flush();
  pending_ = 0;
}

std::vector<TraceRow> read_trace(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  std::getline(in, line);
  if (split(line).size() != 15) throw FormatError(where(path, 1) + "unexpected trace header");
  std::vector<TraceRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 15) throw FormatError(where(path, line_no) + "expected 15 fields");
    TraceRow row;
    row.sweep = parse_number<std::uint64_t>(f[0], path, line_no, "sweep");
    row.alpha = parse_number<double>(f[1], path, line_no, "alpha");
    row.occupied = parse_number<std::size_t>(f[2], path, line_no, "n_clusters");
    row.sticks = parse_number<std::size_t>(f[3], path, line_no, "sticks");
    row.alpha_star = parse_number<double>(f[4], path, line_no, "alpha_star");
    row.log_covariate = parse_optional(f[5], path, line_no, "log_covariate");
    row.log_response = parse_optional(f[6], path, line_no, "log_response");
    row.log_prior = parse_optional(f[7], path, line_no, "log_prior");
    row.log_mpp = parse_optional(f[8], path, line_no, "log_mpp");
    for (std::size_t m = 0; m < 3; ++m) {
      row.attempted[m] = parse_number<int>(f[9 + 2 * m], path, line_no, "move attempts");
      if (f[10 + 2 * m] != "NA") row.accepted[m] = parse_number<int>(f[10 + 2 * m], path, line_no, "move acceptances");
    }
    rows.push_back(row);
  }
  return rows;
}

SampleWriter::SampleWriter(const std::filesystem::path& path, std::size_t n, std::size_t flush_every)
    : out_(open_out(path)), n_(n), flush_every_(flush_every) {
  out_ << "sweep";
  for (std::size_t i = 0; i < n; ++i) out_ << ",z" << i + 1;
  out_ << '\n';
}

void SampleWriter::write(std::uint64_t sweep, const std::vector<int>& z) {
  if (z.size() != n_) throw std::invalid_argument("allocation sample has the wrong length");
  out_ << sweep;
  for (int label : z) out_ << ',' << label;
  out_ << '\n';
  if (++pending_ >= flush_every_) flush();
}

void SampleWriter::flush() {
  out_.flush();
  pending_ = 0;
}

AllocationSamples read_samples(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  std::getline(in, line);
  const std::size_t columns = split(line).size();
  AllocationSamples samples;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != columns) throw FormatError(where(path, line_no) + "expected " + std::to_string(columns) + " fields");
    samples.sweeps.push_back(parse_number<std::uint64_t>(f[0], path, line_no, "sweep"));
    std::vector<int> z(columns - 1);
    for (std::size_t i = 1; i < columns; ++i) z[i - 1] = parse_number<int>(f[i], path, line_no, "label");
    samples.z.push_back(std::move(z));
  }
  return samples;
}

std::string predictive_state_json(std::uint64_t sweep, const PredictiveState& state) {
  json clusters = json::array();
  for (const auto& c : state.clusters) clusters.push_back(cluster_json(c));
  return json{{"sweep", sweep}, {"psi", state.psi}, {"clusters", clusters}, {"beta", state.beta}}.dump();
}

std::vector<PredictiveState> read_predictive_states(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::vector<PredictiveState> states;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      PredictiveState s;
      s.psi = j.at("psi").get<std::vector<double>>();
      for (const auto& c : j.at("clusters")) s.clusters.push_back(cluster_from_json(c));
      s.beta = j.at("beta").get<std::vector<double>>();
      states.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw FormatError(where(path, line_no) + e.what());
    }
  }
  return states;
}

std::string chain_state_json(const ChainState& state) {
  json clusters = json::array();
  for (const auto& c : state.clusters()) clusters.push_back(cluster_json(c));
  return json{{"sweep", state.sweep},
              {"alpha", state.alpha},
              {"z", state.z},
              {"v", state.v()},
              {"clusters", clusters},
              {"beta", state.beta},
              {"proposal_theta", state.proposal.theta},
              {"proposal_beta", state.proposal.beta}}
      .dump(1);
}

ChainState chain_state_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ChainState state;
    state.sweep = j.at("sweep").get<std::uint64_t>();
    state.alpha = j.at("alpha").get<double>();
    state.z = j.at("z").get<std::vector<int>>();
    const auto v = j.at("v").get<std::vector<double>>();
    const auto& clusters = j.at("clusters");
    if (clusters.size() != v.size()) throw FormatError("state has mismatched sticks and clusters");
    for (std::size_t c = 0; c < v.size(); ++c) state.append_stick(v[c], cluster_from_json(clusters[c]));
    state.beta = j.at("beta").get<std::vector<double>>();
    state.proposal.theta = j.at("proposal_theta").get<double>();
    state.proposal.beta = j.at("proposal_beta").get<std::vector<double>>();
    return state;
  } catch (const json::exception& e) {
    throw FormatError(std::string("chain state: ") + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fsbdp
