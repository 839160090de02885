#include <algorithm>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "fsbdp/distributions.hpp"
#include "fsbdp/sampler.hpp"
#include "fsbdp/synthetic.hpp"
#include "support.hpp"

using namespace fsbdp;
using fsbdp::testing::batch_means_se;
using fsbdp::testing::moments;

namespace {

ClusterParams flat_params(const ProfileDataset& d, double theta = 0.0) {
  ClusterParams p;
  p.theta = theta;
  for (int k : d.categories()) p.phi.emplace_back(static_cast<std::size_t>(k), 1.0 / k);
  return p;
}

ChainState simple_state(const ProfileDataset& d, const std::vector<double>& v, std::vector<int> z, double alpha) {
  ChainState s;
  s.alpha = alpha;
  for (double x : v) s.append_stick(x, flat_params(d));
  s.z = std::move(z);
  s.u.assign(s.z.size(), 0.0);
  s.beta.assign(d.num_fixed_effects(), 0.0);
  return s;
}

// Posterior mean of a scalar under exp(log_density), by adaptive quadrature.
template <class F>
double quadrature_mean(F log_density, double centre) {
  using boost::math::quadrature::gauss_kronrod;
  const double inf = std::numeric_limits<double>::infinity();
  const double shift = log_density(centre);
  const double mass =
      gauss_kronrod<double, 61>::integrate([&](double t) { return std::exp(log_density(t) - shift); }, -inf, inf, 15);
  const double first = gauss_kronrod<double, 61>::integrate(
      [&](double t) { return t * std::exp(log_density(t) - shift); }, -inf, inf, 15);
  return first / mass;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
    std::vector<double> r(x.size());
    for (std::size_t k = 0; k < idx.size();) {
      std::size_t m = k;
      while (m + 1 < idx.size() && x[idx[m + 1]] == x[idx[k]]) ++m;
      for (std::size_t q = k; q <= m; ++q) r[idx[q]] = 0.5 * static_cast<double>(k + m) + 1.0;
      k = m + 1;
    }
    return r;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / ra.size();
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / rb.size();
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t k = 0; k < ra.size(); ++k) {
    sab += (ra[k] - ma) * (rb[k] - mb);
    saa += (ra[k] - ma) * (ra[k] - ma);
    sbb += (rb[k] - mb) * (rb[k] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("config validation and derived settings") {
  SamplerConfig config;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);  // init_clusters is required
  config.init_clusters = 10;
  CHECK_NOTHROW(config.validate());
  config.burnin = config.sweeps + 1;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config.burnin = 10;
  config.thin = 0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);

  HyperParams h;
  config = SamplerConfig{};
  CHECK(resolve_alpha_star(config, h) == doctest::Approx(h.alpha_shape / h.alpha_rate));
  h.alpha_fixed = 0.3;
  CHECK(resolve_alpha_star(config, h) == 0.3);
  config.alpha_star = 2.0;
  CHECK(resolve_alpha_star(config, h) == 2.0);

  config.burnin = 100;
  CHECK_FALSE(adapt_schedule(config, 0).active);
  CHECK(adapt_schedule(config, 1).active);
  CHECK(adapt_schedule(config, 100).gain == doctest::Approx(std::pow(100.0, -0.6)));
  CHECK_FALSE(adapt_schedule(config, 101).active);
}

TEST_CASE("initial state spreads labels over init_clusters sticks") {
  RngStream rng(1);
  const auto d = testing::random_dataset(rng, 300, {2, 3}, 2);
  const HyperParams h;
  const auto s = initialise_state(d, h, 7, rng);
  CHECK(s.num_sticks() == 7);
  CHECK(s.occupied_count() == 7);
  CHECK(s.beta.size() == 2);
  CHECK(check_invariants(s, d, false).empty());
  HyperParams fixed;
  fixed.alpha_fixed = 0.8;
  CHECK(initialise_state(d, fixed, 3, rng).alpha == 0.8);
}

TEST_CASE("update_slice: support and mean") {
  RngStream rng(2);
  ProfileDataset d({2}, 0, {0}, {1}, {});
  auto s = simple_state(d, {0.5}, {1}, 1.0);
  std::vector<double> u;
  for (int k = 0; k < 100000; ++k) {
    update_slice(s, rng);
    REQUIRE(s.u[0] > 0.0);
    REQUIRE(s.u[0] < 0.5);
    u.push_back(s.u[0]);
  }
  const auto m = moments(u);
  CHECK(std::abs(m.mean - 0.25) < 4.0 * m.se);

  ProfileDataset empty({2}, 0, {}, {}, {});
  auto e = simple_state(empty, {0.5}, {}, 1.0);
  update_slice(e, rng);
  CHECK(e.u.empty());
}

TEST_CASE("extend_sticks: stopping rule, stick count law and cap") {
  RngStream rng(3);
  const HyperParams h;
  ProfileDataset d({2}, 0, {0}, {1}, {});
  auto s = simple_state(d, {0.95}, {1}, 1.0);
  s.u = {0.9};
  extend_sticks(s, d, h, rng);
  CHECK(s.num_sticks() == 1);

  // -log(1 - V) is Exponential(alpha), so the number of added sticks is 1 + Poisson(alpha log(tail / u)).
  const double alpha = 2.0;
  const double u = 1e-4;
  std::vector<double> added;
  for (int k = 0; k < 20000; ++k) {
    auto t = simple_state(d, {0.5}, {1}, alpha);
    t.u = {u};
    extend_sticks(t, d, h, rng);
    REQUIRE(t.tail_mass() < u);
    added.push_back(static_cast<double>(t.num_sticks() - 1));
  }
  const auto m = moments(added);
  CHECK(std::abs(m.mean - (1.0 + alpha * std::log(0.5 / u))) < 4.0 * m.se);

  auto big = simple_state(d, {0.5}, {1}, 1e6);
  big.u = {1e-12};
  CHECK_THROWS_AS(extend_sticks(big, d, h, rng, 50), std::runtime_error);
}

TEST_CASE("update_allocations: symmetry, determinism and exact conditional") {
  RngStream rng(4);
  ProfileDataset d({2}, 0, {0}, {1}, {});
  auto s = simple_state(d, {0.4, 0.4 / 0.6 * 0.999999}, {1}, 1.0);
  s.set_v(2, 0.4 / 0.6);  // psi_1 = psi_2 = 0.4
  double ones = 0.0;
  for (int k = 0; k < 100000; ++k) {
    s.u = {0.1};
    update_allocations(s, d, rng);
    ones += s.z[0] == 1;
  }
  CHECK(std::abs(ones / 100000 - 0.5) < 4.0 * std::sqrt(0.25 / 100000));

  s.u = {0.39};
  s.set_v(2, 0.1);
  for (int k = 0; k < 100; ++k) {
    update_allocations(s, d, rng);
    REQUIRE(s.z[0] == 1);
  }

  const HyperParams h;
  const auto data = testing::random_dataset(rng, 4, {3, 2}, 1);
  auto st = testing::random_state(rng, data, h, 5, 5, 1.0);
  for (std::size_t i = 0; i < 4; ++i) st.u[i] = 0.3 * st.psi_at(st.z[i]);
  const auto u = st.u;
  std::vector<std::vector<double>> counts(4, std::vector<double>(5, 0.0));
  const int reps = 50000;
  for (int k = 0; k < reps; ++k) {
    st.u = u;
    update_allocations(st, data, rng);
    for (std::size_t i = 0; i < 4; ++i) counts[i][static_cast<std::size_t>(st.z[i] - 1)] += 1.0;
  }
  for (std::size_t i = 0; i < 4; ++i) {
    std::vector<double> observed;
    std::vector<double> probs;
    double total = 0.0;
    for (int c = 1; c <= 5; ++c) {
      if (!(st.psi_at(c) > u[i])) {
        REQUIRE(counts[i][static_cast<std::size_t>(c - 1)] == 0.0);
        continue;
      }
      observed.push_back(counts[i][static_cast<std::size_t>(c - 1)]);
      probs.push_back(std::exp(log_likelihood_obs(i, c, st, data)));
      total += probs.back();
    }
    for (double& p : probs) p /= total;
    if (probs.size() > 1) CHECK(testing::chi_square_p(observed, probs) > 1e-3);
  }
}

TEST_CASE("update_sticks: conjugate moments for fixed Z") {
  RngStream rng(5);
  ProfileDataset d({2}, 0, std::vector<int>(6, 0), std::vector<int>(6, 1), {});
  auto s = simple_state(d, {0.5, 0.5, 0.5, 0.5}, {1, 1, 3, 3, 3, 4}, 1.5);
  const std::vector<int> n{2, 0, 3, 1};
  std::vector<std::vector<double>> v(4);
  std::vector<std::vector<double>> psi(4);
  for (int k = 0; k < 100000; ++k) {
    update_sticks(s, rng);
    for (std::size_t c = 0; c < 4; ++c) {
      v[c].push_back(s.v()[c]);
      psi[c].push_back(s.psi()[c]);
    }
  }
  int tail = 6;
  for (std::size_t c = 0; c < 4; ++c) {
    tail -= n[c];
    const auto mv = moments(v[c]);
    CHECK(std::abs(mv.mean - (1.0 + n[c]) / (1.0 + 1.5 + n[c] + tail)) < 4.0 * mv.se);
    const auto mp = moments(psi[c]);
    CHECK(std::abs(mp.mean - expected_weight(static_cast<int>(c + 1), n, 1.5)) < 4.0 * mp.se);
  }

  ProfileDataset empty({2}, 0, {}, {}, {});
  auto e = simple_state(empty, {0.5}, {}, 3.0);
  std::vector<double> prior;
  for (int k = 0; k < 100000; ++k) {
    update_sticks(e, rng);
    prior.push_back(e.v()[0]);
  }
  const auto mp = moments(prior);
  CHECK(std::abs(mp.mean - 0.25) < 4.0 * mp.se);
}

TEST_CASE("update_cluster_covariate_params: Dirichlet posterior") {
  RngStream rng(6);
  const HyperParams h;
  ProfileDataset d({2}, 0, {0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1}, std::vector<int>(11, 0), {});
  auto s = simple_state(d, {0.5, 0.5, 0.5}, {1, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2}, 1.0);
  std::vector<double> first;
  std::vector<double> empty;
  double last_heavy = 0.0;
  for (int k = 0; k < 100000; ++k) {
    update_cluster_covariate_params(s, d, h, rng);
    first.push_back(s.cluster(1).phi[0][0]);
    empty.push_back(s.cluster(3).phi[0][0]);
    last_heavy += s.cluster(2).phi[0][1];
  }
  auto m = moments(first);
  CHECK(std::abs(m.mean - 2.0 / 3.0) < 4.0 * m.se);
  m = moments(empty);
  CHECK(std::abs(m.mean - 0.5) < 4.0 * m.se);
  CHECK(std::abs(m.variance - 1.0 / 12.0) < 0.003);
  CHECK(last_heavy / 100000 == doctest::Approx(11.0 / 12.0).epsilon(0.01));
}

TEST_CASE("update_theta: prior recovery for an empty cluster") {
  RngStream rng(7);
  const HyperParams h;
  ProfileDataset d({2}, 0, {0}, {1}, {});
  auto s = simple_state(d, {0.5, 0.5}, {1}, 1.0);
  std::vector<double> draws;
  for (int k = 0; k < 40000; ++k) {
    update_theta(s, d, h, rng);
    draws.push_back(s.cluster(2).theta);
  }
  std::sort(draws.begin(), draws.end());
  boost::math::students_t t7(7.0);
  for (double q : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    const double empirical = draws[static_cast<std::size_t>(q * draws.size())];
    // Quantile standard error sqrt(q(1-q)/n) / density.
    const double se = std::sqrt(q * (1 - q) / draws.size()) / boost::math::pdf(t7, boost::math::quantile(t7, q));
    CHECK(std::abs(empirical - boost::math::quantile(t7, q)) < 4.0 * se);
  }
}

TEST_CASE("update_theta: posterior mean for 200 observations with P(Y=1) = 0.9") {
  RngStream rng(8);
  const HyperParams h;
  std::vector<int> y(200, 0);
  for (int i = 0; i < 180; ++i) y[static_cast<std::size_t>(i)] = 1;
  ProfileDataset d({}, 0, {}, y, {});
  auto s = simple_state(d, {0.5}, std::vector<int>(200, 1), 1.0);
  s.proposal.theta = 0.5;
  std::vector<double> chain;
  for (int k = 0; k < 60000; ++k) {
    update_theta(s, d, h, rng);
    if (k >= 1000) chain.push_back(s.cluster(1).theta);
  }
  const double oracle = quadrature_mean(
      [](double t) { return 180.0 * t - 200.0 * std::log1p(std::exp(t)) + testing::oracle_log_t(t, 7.0, 1.0); },
      2.0);
  const double mean = std::accumulate(chain.begin(), chain.end(), 0.0) / chain.size();
  CHECK(std::abs(mean - oracle) < 4.0 * batch_means_se(chain));
  CHECK(std::abs(oracle - 2.197) < 0.1);
}

TEST_CASE("update_beta: posterior mean against quadrature") {
  RngStream rng(9);
  const HyperParams h;
  const auto d = testing::random_dataset(rng, 60, {}, 1);
  auto s = simple_state(d, {0.5}, std::vector<int>(60, 1), 1.0);
  s.cluster(1).theta = 0.3;
  s.beta = {0.0};
  s.proposal.beta = {0.6};
  std::vector<double> chain;
  for (int k = 0; k < 60000; ++k) {
    update_beta(s, d, h, rng);
    if (k >= 1000) chain.push_back(s.beta[0]);
  }
  auto log_post = [&](double b) {
    double ll = testing::oracle_log_t(b, 7.0, 1.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-(0.3 + b * d.w_row(i)[0])));
      ll += std::log(d.y(i) == 1 ? p : 1.0 - p);
    }
    return ll;
  };
  const double mean = std::accumulate(chain.begin(), chain.end(), 0.0) / chain.size();
  CHECK(std::abs(mean - quadrature_mean(log_post, 0.0)) < 4.0 * batch_means_se(chain));
}

TEST_CASE("proposal scales adapt toward the target during burn-in only") {
  RngStream rng(10);
  const HyperParams h;
  std::vector<int> y(200, 0);
  for (int i = 0; i < 100; ++i) y[static_cast<std::size_t>(i)] = 1;
  ProfileDataset d({}, 0, {}, y, {});
  auto s = simple_state(d, {0.5}, std::vector<int>(200, 1), 1.0);
  s.proposal.theta = 50.0;
  SamplerConfig config;
  config.init_clusters = 1;
  config.sweeps = 4000;
  config.burnin = 2000;
  for (std::uint64_t t = 1; t <= 2000; ++t) update_theta(s, d, h, rng, adapt_schedule(config, t));
  const double tuned = s.proposal.theta;
  CHECK(tuned < 5.0);
  int accepted = 0;
  for (std::uint64_t t = 2001; t <= 4000; ++t) {
    const double before = s.cluster(1).theta;
    update_theta(s, d, h, rng, adapt_schedule(config, t));
    accepted += s.cluster(1).theta != before;
  }
  CHECK(s.proposal.theta == tuned);
  CHECK(std::abs(accepted / 2000.0 - 0.44) < 0.1);
}

TEST_CASE("update_alpha: conjugate example, empty stick set and fixed alpha") {
  RngStream rng(11);
  HyperParams h;
  h.alpha_shape = 1.0;
  h.alpha_rate = 1.0;
  ProfileDataset d({2}, 0, {}, {}, {});
  auto s = simple_state(d, {1.0 - std::exp(-1.0)}, {}, 1.0);
  std::vector<double> a;
  for (int k = 0; k < 100000; ++k) {
    update_alpha(s, h, rng);
    a.push_back(s.alpha);
  }
  auto m = moments(a);
  CHECK(std::abs(m.mean - 1.0) < 4.0 * m.se);
  CHECK(std::abs(m.variance - 0.5) < 0.02);

  auto none = simple_state(d, {}, {}, 1.0);
  a.clear();
  for (int k = 0; k < 100000; ++k) {
    update_alpha(none, h, rng);
    a.push_back(none.alpha);
  }
  m = moments(a);
  CHECK(std::abs(m.mean - 1.0) < 4.0 * m.se);

  h.alpha_fixed = 0.25;
  update_alpha(s, h, rng);
  CHECK(s.alpha == 0.25);
}

TEST_CASE("no-data Geweke check: sticks and alpha alternate to the prior") {
  RngStream rng(12);
  HyperParams h;
  h.alpha_shape = 2.0;
  h.alpha_rate = 1.0;
  ProfileDataset d({2}, 0, {}, {}, {});
  auto s = simple_state(d, {0.5, 0.5, 0.5}, {}, 1.0);
  std::vector<double> alpha;
  std::vector<double> v1;
  for (int k = 0; k < 200000; ++k) {
    update_sticks(s, rng);
    update_alpha(s, h, rng);
    alpha.push_back(s.alpha);
    v1.push_back(s.v()[0]);
  }
  const double mean = std::accumulate(alpha.begin(), alpha.end(), 0.0) / alpha.size();
  CHECK(std::abs(mean - 2.0) < 4.0 * batch_means_se(alpha));
  double sq = 0.0;
  for (double x : alpha) sq += (x - 2.0) * (x - 2.0);
  CHECK(sq / alpha.size() == doctest::Approx(2.0).epsilon(0.05));

  // E[V_1] = E[1 / (1 + alpha)] under the Gamma(2, 1) prior, by quadrature.
  using boost::math::quadrature::gauss_kronrod;
  boost::math::gamma_distribution<double> prior(2.0, 1.0);
  const double expected = gauss_kronrod<double, 61>::integrate(
      [&](double x) { return boost::math::pdf(prior, x) / (1.0 + x); }, 0.0, std::numeric_limits<double>::infinity(),
      15);
  const double v_mean = std::accumulate(v1.begin(), v1.end(), 0.0) / v1.size();
  CHECK(std::abs(v_mean - expected) < 4.0 * batch_means_se(v1));

  // Full sweeps with no observations: alpha keeps its prior.
  SamplerConfig config;
  config.init_clusters = 1;
  config.mpp_every = 0;
  config.debug_checks = true;
  auto full = simple_state(d, {0.5, 0.5}, {}, 1.0);
  std::vector<double> a;
  for (int k = 0; k < 100000; ++k) a.push_back(sweep(full, d, h, config, rng).alpha);
  const auto m = moments(a);
  CHECK(std::abs(m.mean - 2.0) < 4.0 * batch_means_se(a));
}

TEST_CASE("prior stick ordering: P(psi_c > psi_{c+1}) exceeds one half") {
  RngStream rng(13);
  for (double alpha : {0.5, 1.0, 2.0, 5.0}) {
    std::array<int, 3> wins{};
    const int reps = 100000;
    for (int k = 0; k < reps; ++k) {
      double rest = 1.0;
      std::array<double, 4> psi{};
      for (double& p : psi) {
        const double v = draw_beta(rng, 1.0, alpha);
        p = v * rest;
        rest *= 1.0 - v;
      }
      for (std::size_t c = 0; c < 3; ++c) wins[c] += psi[c] > psi[c + 1];
    }
    for (int w : wins) CHECK(w / static_cast<double>(reps) - 0.5 > 4.0 * std::sqrt(0.25 / reps));
  }
}

TEST_CASE("prune_sticks keeps interior empty sticks") {
  ProfileDataset d({2}, 0, {0, 0}, {0, 1}, {});
  auto s = simple_state(d, {0.3, 0.3, 0.3, 0.3, 0.3}, {1, 3}, 1.0);
  prune_sticks(s);
  CHECK(s.num_sticks() == 3);
}

TEST_CASE("sweeps are deterministic and keep every invariant") {
  RngStream gen(14);
  const auto d = testing::random_dataset(gen, 80, {2, 4}, 2);
  const HyperParams h;
  SamplerConfig config;
  config.init_clusters = 6;
  config.mpp_every = 5;
  config.debug_checks = true;
  for (auto mode : {LabelMoveMode::occupied, LabelMoveMode::exact}) {
    config.label_move_mode = mode;
    RngStream a(99);
    RngStream b(99);
    auto sa = initialise_state(d, h, 6, a);
    auto sb = initialise_state(d, h, 6, b);
    for (int t = 1; t <= 200; ++t) {
      const auto ra = sweep(sa, d, h, config, a);
      const auto rb = sweep(sb, d, h, config, b);
      REQUIRE(ra.alpha == rb.alpha);
      REQUIRE(ra.log_mpp == rb.log_mpp);
      REQUIRE(ra.log_covariate.has_value() == (t % 5 == 0));
      REQUIRE(sa.z == sb.z);
      REQUIRE(sa.v() == sb.v());
      REQUIRE(check_invariants(sa, d, false).empty());
    }
    CHECK(a == b);
  }
}

TEST_CASE("move tallies follow the enable flags") {
  RngStream rng(15);
  const auto d = testing::random_dataset(rng, 50, {3}, 0);
  const HyperParams h;
  SamplerConfig config;
  config.init_clusters = 5;
  config.mpp_every = 0;
  config.moves = {true, false, true};
  config.label_switch_attempts = 3;
  auto s = initialise_state(d, h, 5, rng);
  const auto r = sweep(s, d, h, config, rng);
  CHECK(r.moves[0].attempted <= 3);
  CHECK(r.moves[1].attempted == 0);
  CHECK(r.moves[2].accepted <= r.moves[2].attempted);
}

TEST_CASE("larger concentration gives more clusters") {
  RngStream gen(16);
  const auto d = testing::random_dataset(gen, 100, {2, 2}, 0);
  auto mean_occupied = [&](double alpha) {
    HyperParams h;
    h.alpha_fixed = alpha;
    SamplerConfig config;
    config.init_clusters = 5;
    config.mpp_every = 0;
    RngStream rng(17);
    auto s = initialise_state(d, h, 5, rng);
    double total = 0.0;
    for (int t = 0; t < 3000; ++t) {
      const auto r = sweep(s, d, h, config, rng);
      if (t >= 500) total += static_cast<double>(r.occupied);
    }
    return total / 2500.0;
  };
  const double few = mean_occupied(0.2);
  const double mid = mean_occupied(2.0);
  const double many = mean_occupied(10.0);
  CHECK(few < mid);
  CHECK(mid < many);
}

TEST_CASE("dataset 1 from 31 initial clusters: occupied count trends down over 500 sweeps") {
  RngStream gen(18);
  const auto d1 = generate_dataset1(gen);
  const HyperParams h;
  SamplerConfig config;
  config.init_clusters = 31;
  config.mpp_every = 0;
  RngStream rng(19);
  auto s = initialise_state(d1.data, h, 31, rng);
  std::vector<double> index;
  std::vector<double> occupied;
  for (int t = 1; t <= 500; ++t) {
    occupied.push_back(static_cast<double>(sweep(s, d1.data, h, config, rng).occupied));
    index.push_back(t);
  }
  CHECK(spearman(index, occupied) < 0.0);
}
