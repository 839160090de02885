#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "fsbdp/model.hpp"
#include "fsbdp/synthetic.hpp"
#include "support.hpp"

using namespace fsbdp;

namespace {

ClusterParams params(double theta, std::vector<std::vector<double>> phi = {}) {
  ClusterParams p;
  p.theta = theta;
  p.phi = std::move(phi);
  return p;
}

bool mentions(const std::vector<std::string>& problems, const std::string& text) {
  for (const auto& p : problems) {
    if (p.find(text) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("log_likelihood_obs: documented values") {
  SUBCASE("symmetric intercept and covariate") {
    ProfileDataset d({2}, 0, {0}, {1}, {});
    ChainState s;
    s.append_stick(0.5, params(0.0, {{0.5, 0.5}}));
    s.z = {1};
    CHECK(log_likelihood_obs(0, 1, s, d) == doctest::Approx(-1.386294361).epsilon(1e-9));
  }
  SUBCASE("intercept 2.19, no covariates") {
    ProfileDataset d({}, 0, {}, {1}, {});
    ChainState s;
    s.append_stick(0.5, params(2.19));
    s.z = {1};
    CHECK(log_likelihood_obs(0, 1, s, d) == doctest::Approx(std::log(1.0 / (1.0 + std::exp(-2.19)))));
    CHECK(log_likelihood_obs(0, 1, s, d) == doctest::Approx(-0.1062).epsilon(1e-3));
  }
  SUBCASE("fixed effect cancels the intercept") {
    ProfileDataset d({}, 1, {}, {0}, {0.84});
    ChainState s;
    s.append_stick(0.5, params(-0.84));
    s.z = {1};
    s.beta = {1.0};
    CHECK(log_likelihood_obs(0, 1, s, d) == doctest::Approx(std::log(0.5)).epsilon(1e-14));
  }
}

TEST_CASE("log_likelihood_obs agrees with a direct evaluation") {
  RngStream rng(3);
  const HyperParams h;
  const auto d = testing::random_dataset(rng, 30, {2, 3, 5}, 2);
  const auto s = testing::random_state(rng, d, h, 4, 4, 1.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (int c = 1; c <= 4; ++c) {
      const ClusterParams& p = s.cluster(c);
      const double eta = p.theta + s.beta[0] * d.w_row(i)[0] + s.beta[1] * d.w_row(i)[1];
      double expected = d.y(i) == 1 ? -std::log1p(std::exp(-eta)) : -std::log1p(std::exp(eta));
      for (std::size_t j = 0; j < 3; ++j) expected += std::log(p.phi[j][static_cast<std::size_t>(d.x(i, j))]);
      REQUIRE(log_likelihood_obs(i, c, s, d) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("cluster_counts: documented values") {
  ProfileDataset d({2}, 0, {0, 1, 1}, {0, 1, 1}, {});
  const std::vector<int> z{1, 1, 2};
  const auto counts = cluster_counts(z, 3, d);
  CHECK(counts.sizes() == std::vector<int>{2, 1, 0});
  CHECK(counts.nk(1, 0, 0) == 1);
  CHECK(counts.nk(1, 0, 1) == 1);
  CHECK(counts.nk(2, 0, 1) == 1);
  CHECK(counts.tail_count(1) == 1);
  CHECK(counts.tail_count(3) == 0);
  CHECK(cluster_sizes(z, 3) == std::vector<int>{2, 1, 0});

  ProfileDataset one({2}, 0, {0}, {1}, {});
  const std::vector<int> z1{1};
  const auto c1 = cluster_counts(z1, 1, one);
  CHECK(c1.nk(1, 0, 0) == 1);
  CHECK(c1.nk(1, 0, 1) == 0);

  RngStream rng(1);
  const auto d1 = generate_dataset1(rng);
  CHECK(cluster_sizes(d1.truth, 5) == std::vector<int>{200, 200, 200, 200, 200});
}

TEST_CASE("dataset validation names the offending row") {
  CHECK_THROWS_WITH_AS(ProfileDataset({2}, 0, {0, 2}, {0, 1}, {}), "row 2, covariate 1: category 2 outside [0, 2)",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(ProfileDataset({2}, 0, {0, 1}, {0, 3}, {}), "row 2: response must be 0 or 1",
                       std::invalid_argument);
  CHECK_THROWS_AS(ProfileDataset({1}, 0, {0}, {0}, {}), std::invalid_argument);
  CHECK_THROWS_AS(ProfileDataset({2}, 0, {0}, {0, 1}, {}), std::invalid_argument);
  CHECK_THROWS_AS(ProfileDataset({}, 1, {}, {0}, {NAN}), std::invalid_argument);
}

TEST_CASE("fingerprint separates different datasets") {
  ProfileDataset a({2}, 0, {0, 1}, {0, 1}, {});
  ProfileDataset b({2}, 0, {1, 0}, {0, 1}, {});
  ProfileDataset c({2}, 0, {0, 1}, {0, 1}, {});
  CHECK(a.fingerprint() == c.fingerprint());
  CHECK(a.fingerprint() != b.fingerprint());
}

TEST_CASE("psi cache follows stick-breaking") {
  RngStream rng(8);
  ChainState s;
  std::vector<double> v;
  for (int c = 0; c < 12; ++c) {
    v.push_back(0.05 + 0.9 * rng.uniform());
    s.append_stick(v.back(), params(0.0));
  }
  auto check = [&] {
    const auto expected = testing::oracle_weights(s.v());
    double tail = 1.0;
    for (std::size_t c = 0; c < expected.size(); ++c) {
      REQUIRE(s.psi()[c] == doctest::Approx(expected[c]).epsilon(1e-14));
      tail -= expected[c];
    }
    CHECK(s.tail_mass() == doctest::Approx(tail).epsilon(1e-10));
  };
  check();
  s.set_v(3, 0.99);
  check();
  s.set_all_v(std::vector<double>(12, 0.3));
  check();
  s.truncate_sticks(4);
  CHECK(s.num_sticks() == 4);
  check();
}

TEST_CASE("swap_labels exchanges parameters and relabels") {
  ChainState s;
  s.append_stick(0.3, params(1.0));
  s.append_stick(0.6, params(2.0));
  s.append_stick(0.2, params(3.0));
  s.z = {1, 2, 2, 3, 1};
  s.swap_labels(1, 2);
  CHECK(s.z == std::vector<int>{2, 1, 1, 3, 2});
  CHECK(s.cluster(1).theta == 2.0);
  CHECK(s.cluster(2).theta == 1.0);
  CHECK(s.v() == std::vector<double>{0.3, 0.6, 0.2});
  CHECK(s.max_label() == 3);
  CHECK(s.occupied_count() == 3);
}

TEST_CASE("check_invariants reports each violation") {
  ProfileDataset d({2}, 0, {0, 1}, {0, 1}, {});
  ChainState s;
  s.append_stick(0.5, params(0.0, {{0.5, 0.5}}));
  s.append_stick(0.5, params(0.0, {{0.5, 0.5}}));
  s.z = {1, 2};
  s.u = {0.1, 0.1};
  CHECK(check_invariants(s, d, true).empty());

  s.u = {0.1, 0.3};
  CHECK(mentions(check_invariants(s, d, true), "slice variable 2"));
  CHECK(check_invariants(s, d, false).empty());

  s.z = {1, 3};
  CHECK(mentions(check_invariants(s, d, false), "label of observation 2"));
  s.z = {1, 2};
  s.cluster(2).phi = {{0.7, 0.7}};
  CHECK(mentions(check_invariants(s, d, false), "cluster 2 covariate 1 is not a simplex"));
  s.cluster(2).phi = {{0.3, 0.7}};
  s.alpha = 0.0;
  CHECK(mentions(check_invariants(s, d, false), "alpha is not positive"));
  s.alpha = 1.0;
  s.beta = {1.0};
  CHECK(mentions(check_invariants(s, d, false), "beta has wrong length"));
}

TEST_CASE("hyperparameter validation") {
  HyperParams h;
  CHECK_NOTHROW(h.validate());
  h.nu = 0.0;
  CHECK_THROWS_AS(h.validate(), std::invalid_argument);
  h = HyperParams{};
  h.alpha_fixed = -1.0;
  CHECK_THROWS_AS(h.validate(), std::invalid_argument);
}
