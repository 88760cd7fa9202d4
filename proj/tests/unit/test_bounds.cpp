#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "mmseq/bounds.hpp"
#include "mmseq/errors.hpp"
#include "mmseq/model.hpp"
#include "mmseq/rng.hpp"
#include "mmseq/stats.hpp"

using namespace mmseq;

namespace {

// Dense-grid minimum of the subgaussian objective, written out independently.
std::pair<double, double> grid_minimum(double e1, double e4, double v, double k, double p, double c1,
                                       double c2, std::size_t points) {
  const double hi = 20.0 * std::sqrt(v);
  double best = std::numeric_limits<double>::infinity();
  double arg = e1;
  for (std::size_t i = 1; i <= points; ++i) {
    const double r = e1 + hi * static_cast<double>(i) / static_cast<double>(points);
    const double g = c1 * r * r * std::pow(k, -2.0 / p) +
                     c2 * std::sqrt(e4) * std::exp(-(r - e1) * (r - e1) / (4.0 * v));
    if (g < best) {
      best = g;
      arg = r;
    }
  }
  return {best, arg};
}

}  // namespace

TEST_SUITE("bounds") {
  TEST_CASE("thm1 examples") {
    CHECK(thm1_rhs(1.0, 0.1, 100, 1.0, 0.0) == doctest::Approx(0.01));
    CHECK(thm1_rhs(1.0, 0.1, 100000000, 1.0, 0.0) < 1e-4);
    // Large delta: second branch, L D (E + sqrt(mmse)) / sqrt(n).
    CHECK(thm1_rhs(2.0, 50.0, 4, 1.0, 0.25) == doctest::Approx(2.0 * 50.0 * 1.5 / 2.0));
    CHECK(thm1_rhs(1.0, 0.0, 10, 1.0, 0.1) == 0.0);
  }

  TEST_CASE("thm1 gaussian examples") {
    CHECK(thm1_rhs_gaussian(1.0, 0.1, 100, 1.0) == doctest::Approx(0.01));
    CHECK(thm1_rhs_gaussian(1.0, 0.1, 100, 0.0) == 0.0);
    // Delta sqrt(n) = sigma: both branches equal L Delta^2.
    const double d = 0.05;
    CHECK(thm1_rhs_gaussian(3.0, d, 400, d * 20.0) == doctest::Approx(3.0 * d * d));
    CHECK(thm1_rhs_gaussian(1.0, 0.3, 9, 0.5) == doctest::Approx(thm1_rhs(1.0, 0.3, 9, 0.5, 0.0)));
  }

  TEST_CASE("corollary examples") {
    CHECK(corollary_rhs(10, 1000000, 1.0, 0.0, 1.0) == doctest::Approx(1e-4));
    CHECK(corollary_rhs(10, 100, 1.0, 0.0, 1.0) == doctest::Approx(0.01));
    CHECK(corollary_rhs(10, 100, 1.0, 0.0, 1.0) == doctest::Approx(1.0 / (10.0 * std::sqrt(100.0))));
    CHECK(corollary_weakened_rhs(10, 0.0004, 2.0) == doctest::Approx(2.0 * 0.002));
    CHECK(corollary_weakened_rhs(10, 1.0, 2.0) == doctest::Approx(0.02));
  }

  TEST_CASE("weakened corollary dominates under the information inequality") {
    Engine eng(3);
    std::uniform_real_distribution<double> u(0.01, 3.0);
    std::uniform_int_distribution<std::size_t> kd(1, 500);
    std::uniform_int_distribution<std::size_t> nd(1, 100000);
    for (int i = 0; i < 10000; ++i) {
      const double e_inv = u(eng);                 // E[1/I]
      const double e_inv_sqrt = std::sqrt(e_inv) * u(eng) / 3.0;  // <= sqrt(E[1/I]) by Jensen
      const std::size_t n = nd(eng);
      const double mmse = e_inv / double(n) * (1.0 + u(eng));
      const std::size_t k = kd(eng);
      CHECK(corollary_rhs(k, n, e_inv_sqrt, mmse, 1.0) <=
            2.0 * corollary_weakened_rhs(k, mmse, 1.0) * (1.0 + 1e-12));
    }
  }

  TEST_CASE("information inequality gap") {
    const auto m = ScalarChannelModel::uniform_gaussian(1.0, 0.2);
    CHECK(info_inequality_gap(m, 10, 0.01) == doctest::Approx(0.01 - 0.04 / 10.0));
    const auto l = ScalarChannelModel::uniform_logistic(1.0, 0.5);
    CHECK(info_inequality_gap(l, 4, 0.3) == doctest::Approx(0.3 - 0.75 / 4.0));
    CHECK_THROWS_AS(info_inequality_gap(ScalarChannelModel::uniform_noiseless(1.0), 10, 0.0),
                    DomainError);
  }

  TEST_CASE("thm2 moment examples") {
    CHECK(thm2_bound_moment(1.0, 1.0, 64, 1, 1.0) == doctest::Approx(1.0 / 16.0));
    CHECK(thm2_bound_moment(2.0, 3.0, 1, 2, 1.5) == doctest::Approx(1.5 * std::pow(6.0, 2.0 / 3.0)));
    const double v2 = thm2_bound_moment(2.0, 3.0, 100, 2, 1.0);
    CHECK(v2 == doctest::Approx(std::pow(6.0, 2.0 / 3.0) * std::pow(100.0, -1.0 / 3.0)));
  }

  TEST_CASE("moment balance radius minimizes the balance objective") {
    const double e2 = 1.3;
    const double e4 = 2.9;
    for (std::size_t k : {4u, 64u, 1000u}) {
      for (std::size_t p : {1u, 2u, 3u}) {
        const double r = moment_balance_radius(e2, e4, k, p);
        auto f = [&](double t) {
          return t * t * std::pow(double(k), -2.0 / p) + std::sqrt(e2 * e4) / t;
        };
        CHECK(f(r) <= f(r * 1.01));
        CHECK(f(r) <= f(r * 0.99));
      }
    }
  }

  TEST_CASE("thm2 subgaussian agrees with a dense grid oracle") {
    const auto sub = thm2_bound_subgaussian(1.0, 1.0, 1.0, 64, 2, 1.0, 1.0);
    const auto [g, r] = grid_minimum(1.0, 1.0, 1.0, 64.0, 2.0, 1.0, 1.0, 1000000);
    CHECK(sub.value == doctest::Approx(g).epsilon(1e-6));
    CHECK(sub.value <= g * (1.0 + 1e-12));
    CHECK(sub.r_star == doctest::Approx(r).epsilon(1e-4));
    CHECK(sub.r_star > 1.0);
  }

  TEST_CASE("thm2 subgaussian limits") {
    double prev = 1e9;
    for (std::size_t k : {4u, 64u, 1024u, 65536u, 1048576u}) {
      const auto s = thm2_bound_subgaussian(1.0, 2.0, 0.5, k, 1, 1.0, 1.0);
      CHECK(s.value < prev);
      prev = s.value;
    }
    CHECK(prev < 1e-4);
    const auto tight = thm2_bound_subgaussian(1.2, 3.0, 1e-10, 16, 2, 1.0, 1.0);
    CHECK(tight.r_star == doctest::Approx(1.2).epsilon(1e-3));
    CHECK(tight.value == doctest::Approx(1.44 / 16.0).epsilon(1e-3));
  }

  TEST_CASE("thm2 subgaussian optimality certificate") {
    Engine eng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
      const double e1 = 0.1 + 2.0 * u(eng);
      const double e4 = std::pow(e1, 4) * (1.0 + u(eng));
      const double v = 0.05 + u(eng);
      const std::size_t k = 2 + static_cast<std::size_t>(500 * u(eng));
      const std::size_t p = 1 + static_cast<std::size_t>(3 * u(eng));
      const double c1 = 0.1 + u(eng);
      const double c2 = 0.1 + u(eng);
      const auto s = thm2_bound_subgaussian(e1, e4, v, k, p, c1, c2);
      CHECK(s.r_star > e1);
      CHECK(s.value >= 0.0);
      for (int i = 0; i < 1000; ++i) {
        const double r = e1 + 20.0 * std::sqrt(v) * (1.0 - u(eng));
        CHECK(s.value <= thm2_objective(r, e1, e4, v, k, p, c1, c2) * (1.0 + 1e-8));
      }
    }
  }

  TEST_CASE("weakened thm2 examples") {
    CHECK(weakened_thm2(7, 1, 1.0) == doctest::Approx(std::log(7.0) / 49.0));
    CHECK(weakened_thm2(100, 2, 3.0) == doctest::Approx(3.0 * std::log(100.0) / 100.0));
    CHECK_THROWS_AS(weakened_thm2(1, 1, 1.0), InvalidInputError);
  }

  TEST_CASE("weakened and subgaussian forms stay within a constant factor") {
    const auto lg = LinearGaussianModel::isotropic(2, 1.0);
    const auto km = lg.known_moments();
    const double v = lg.subgaussian_v();
    const double c1 = fit_scale(
        thm2_bound_subgaussian(*km.mean_norm, *km.mean_fourth_norm, v, 16, 2, 1, 1).value,
        weakened_thm2(16, 2, 1.0));
    double lo = 1e9;
    double hi = 0.0;
    for (std::size_t k = 16; k <= 4096; k *= 2) {
      const double ratio = weakened_thm2(k, 2, c1) /
                           thm2_bound_subgaussian(*km.mean_norm, *km.mean_fourth_norm, v, k, 2, 1, 1).value;
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    CHECK(hi / lo <= 4.0);
  }

  TEST_CASE("bound evaluators are monotone in their arguments") {
    Engine eng(17);
    std::uniform_real_distribution<double> u(0.01, 2.0);
    std::uniform_int_distribution<std::size_t> nd(1, 10000);
    for (int t = 0; t < 2000; ++t) {
      const double L = u(eng);
      const double d = u(eng);
      const double e = u(eng);
      const double m = u(eng);
      const std::size_t n = nd(eng);
      const double base = thm1_rhs(L, d, n, e, m);
      CHECK(thm1_rhs(L * 1.5, d, n, e, m) >= base);
      CHECK(thm1_rhs(L, d * 1.5, n, e, m) >= base);
      CHECK(thm1_rhs(L, d, n, e * 1.5, m) >= base);
      CHECK(thm1_rhs(L, d, n, e, m * 1.5) >= base);
      CHECK(thm1_rhs(L, d, n + 7, e, m) <= base);
      CHECK(thm1_rhs_gaussian(L, d, n, e * 1.5) >= thm1_rhs_gaussian(L, d, n, e));
      const std::size_t k = nd(eng) % 300 + 2;
      const double cb = corollary_rhs(k, n, e, m, L);
      CHECK(corollary_rhs(k + 1, n, e, m, L) <= cb);
      CHECK(corollary_rhs(k, n + 1, e, m, L) <= cb);
      CHECK(corollary_rhs(k, n, e * 1.2, m, L) >= cb);
      CHECK(corollary_weakened_rhs(k, m * 1.3, L) >= corollary_weakened_rhs(k, m, L));
      CHECK(thm2_bound_moment(d, e, k + 1, 2, L) <= thm2_bound_moment(d, e, k, 2, L));
      CHECK(thm2_bound_moment(d * 1.1, e, k, 2, L) >= thm2_bound_moment(d, e, k, 2, L));
      CHECK(weakened_thm2(k + 1, 1, L) <= weakened_thm2(k, 1, L));
    }
  }

  TEST_CASE("score average") {
    const auto g = ScalarChannelModel::uniform_gaussian(1.0, 0.7);
    std::vector<double> x{0.3, -0.2, 1.1};
    CHECK(score_average_Gn(g, x, 0.25) == doctest::Approx((0.3 - 0.2 + 1.1) / 3.0 - 0.25).epsilon(1e-13));
    CHECK_THROWS_AS(score_average_Gn(g, x, 1.5), DomainError);

    for (const auto& m : {g, ScalarChannelModel::uniform_logistic(1.0, 0.4)}) {
      const double y = 0.4;
      const std::size_t n = 5;
      Engine eng(33);
      RunningMoments mean;
      RunningMoments sq;
      std::vector<double> obs(n);
      for (int i = 0; i < 100000; ++i) {
        m.sample_observations(y, obs, eng);
        const double v = score_average_Gn(m, obs, y);
        mean.add(v);
        sq.add(v * v);
      }
      CHECK(std::abs(mean.mean()) <= 3.0 * mean.standard_error());
      CHECK(std::abs(mean.variance() - 1.0 / (n * m.fisher(y))) <= 3.0 * sq.standard_error());
    }
  }

  TEST_CASE("bvm diagnostics") {
    const auto m = ScalarChannelModel::uniform_gaussian(1.0, 0.1);
    BvmOptions opts;
    opts.seed = 4;
    opts.L0 = {0.25, 0.5, 1.0, 2.0};
    const auto s = bvm_diagnostics(m, 100, opts);
    REQUIRE(s.scaled_z_quantiles.size() == 3);
    CHECK(s.scaled_z_quantiles[0].first == 0.5);
    CHECK(s.scaled_z_quantiles[0].second <= 0.5);
    REQUIRE(s.coverage.size() == 4);
    for (std::size_t i = 1; i < s.coverage.size(); ++i) {
      CHECK(s.coverage[i].second >= s.coverage[i - 1].second);
    }
    CHECK(s.mean_sq_error.value == doctest::Approx(1e-4).epsilon(0.1));
    const auto j = nlohmann::json::parse(to_json(s));
    CHECK(j.contains("mean_abs_z"));
    CHECK(j.contains("coverage"));
    opts.N = 9999;
    CHECK_THROWS_AS(bvm_diagnostics(m, 100, opts), InvalidInputError);
  }

  TEST_CASE("bound config validation and requests") {
    BoundConfig c;
    CHECK_NOTHROW(c.validate());
    c.c2 = 0.0;
    CHECK_THROWS_AS(c.validate(), InvalidInputError);
    c.c2 = std::nan("");
    CHECK_THROWS_AS(c.validate(), InvalidInputError);

    BoundRequest req{"thm2-subgaussian", {}, {{"e1", 1.0}, {"e4", 1.0}, {"v", 1.0}, {"k", 64}, {"p", 2}}, {}};
    const auto rep = evaluate_bound(req);
    REQUIRE(rep.r_star.has_value());
    CHECK(*rep.r_star > 1.0);
    const auto j = nlohmann::json::parse(to_json(rep));
    CHECK(j["bound"] == "thm2-subgaussian");
    CHECK(j.contains("value"));
    CHECK(j.contains("r_star"));
    CHECK(j.contains("config"));
    CHECK(j.contains("inputs"));

    BoundRequest thm1{"thm1", {}, {{"delta", 0.1}, {"n", 100}, {"e_inv_sqrt_fisher", 1.0}, {"mmse", 0.0}}, {}};
    const auto r1 = evaluate_bound(thm1);
    CHECK(r1.value == doctest::Approx(0.01));
    CHECK_FALSE(nlohmann::json::parse(to_json(r1)).contains("r_star"));

    thm1.inputs.erase("mmse");
    CHECK_THROWS_AS(evaluate_bound(thm1), InvalidInputError);
    BoundRequest unknown{"thm3", {}, {}, {}};
    CHECK_THROWS_AS(evaluate_bound(unknown), InvalidInputError);
    BoundRequest frac{"weakened-thm2", {}, {{"k", 2.5}, {"p", 1}}, {}};
    CHECK_THROWS_AS(evaluate_bound(frac), InvalidInputError);

    BoundRequest gap{"info-gap", {}, {{"n", 10}, {"mmse", 0.01}},
                     ScalarChannelModel::uniform_gaussian(1.0, 0.1)};
    CHECK(evaluate_bound(gap).value == doctest::Approx(0.01 - 0.001));
  }

  TEST_CASE("fit_scale") {
    CHECK(fit_scale(3.0, 1.5) == 2.0);
    CHECK_THROWS_AS(fit_scale(1.0, 0.0), InvalidInputError);
  }
}
