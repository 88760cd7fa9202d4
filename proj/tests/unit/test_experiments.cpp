#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "mmseq/codebook_io.hpp"
#include "mmseq/errors.hpp"
#include "mmseq/experiments.hpp"
#include "mmseq/regret.hpp"

using namespace mmseq;

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  return out;
}

// CSV text with the wall_ms column dropped.
std::string without_wall_time(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  write_csv(os, rows);
  std::istringstream is(os.str());
  std::string line;
  std::string out;
  while (std::getline(is, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

SweepRow random_row(Engine& eng, int i) {
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  std::uniform_real_distribution<double> e(-30.0, 30.0);
  auto val = [&] { return u(eng) * std::pow(10.0, e(eng)); };
  SweepRow r;
  r.model = "m" + std::to_string(i);
  r.n = static_cast<std::size_t>(i) * 7 + 1;
  r.k = static_cast<std::size_t>(i) + 2;
  r.N = 100000;
  r.seed = eng();
  r.mmse = {val(), val()};
  r.mmse_k = {val(), val()};
  r.regret = {val(), val()};
  r.dist_y = val();
  r.bound = val();
  r.regime = i % 2 ? "quantization-limited" : "estimation-limited";
  r.wall_ms = std::abs(val());
  return r;
}

}  // namespace

TEST_SUITE("experiments") {
  TEST_CASE("regime_classify examples") {
    CHECK(regime_classify(10000, 10) == Regime::kQuantizationLimited);
    CHECK(regime_classify(16, 100) == Regime::kEstimationLimited);
    CHECK(regime_classify(100, 10) == Regime::kEstimationLimited);
    CHECK(regime_classify(101, 10) == Regime::kQuantizationLimited);
    CHECK(to_string(Regime::kQuantizationLimited) == "quantization-limited");
    CHECK_THROWS_AS(regime_classify(0, 3), InvalidInputError);
  }

  TEST_CASE("fit_loglog_slope examples") {
    std::vector<std::pair<double, double>> exact;
    std::vector<std::pair<double, double>> flat;
    std::vector<std::pair<double, double>> wiggle;
    int sign = 1;
    for (double x : {1.0, 2.0, 4.0, 8.0}) {
      exact.emplace_back(x, 1.0 / (x * x));
      flat.emplace_back(x, 3.0);
      wiggle.emplace_back(x, (1.0 + 0.01 * sign) / (x * x));
      sign = -sign;
    }
    const auto f = fit_loglog_slope(exact);
    CHECK(f.slope == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(f.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.intercept == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(fit_loglog_slope(flat).slope == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(std::abs(fit_loglog_slope(wiggle).slope + 2.0) <= 0.05);
    CHECK_THROWS_AS(fit_loglog_slope({{1.0, 1.0}}), InvalidInputError);
    CHECK_THROWS_AS(fit_loglog_slope({{1.0, 1.0}, {1.0, 2.0}}), InvalidInputError);
    CHECK_THROWS_AS(fit_loglog_slope({{1.0, 1.0}, {2.0, -1.0}}), InvalidInputError);
  }

  TEST_CASE("CSV output") {
    std::ostringstream empty;
    write_csv(empty, {});
    CHECK(empty.str() == std::string(kSweepCsvHeader) + "\n");

    Engine eng(1);
    const SweepRow one = random_row(eng, 3);
    std::stringstream ss;
    write_csv(ss, {one});
    const auto back = read_csv(ss);
    REQUIRE(back.size() == 1);
    CHECK(back[0].model == one.model);
    CHECK(back[0].seed == one.seed);
    CHECK(back[0].mmse.value == one.mmse.value);
    CHECK(back[0].regret.se == one.regret.se);
    CHECK(back[0].regime == one.regime);
  }

  TEST_CASE("100-row CSV parsed independently reproduces every float") {
    Engine eng(2);
    std::vector<SweepRow> rows;
    for (int i = 0; i < 100; ++i) rows.push_back(random_row(eng, i));
    std::ostringstream os;
    write_csv(os, rows);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == kSweepCsvHeader);
    for (const auto& r : rows) {
      REQUIRE(std::getline(is, line));
      const auto f = split(line);
      REQUIRE(f.size() == 15);
      CHECK(f[0] == r.model);
      CHECK(std::stoull(f[4]) == r.seed);
      const double expect[] = {r.mmse.value, r.mmse.se, r.mmse_k.value, r.mmse_k.se, r.regret.value,
                               r.regret.se, r.dist_y, r.bound};
      for (int c = 0; c < 8; ++c) CHECK(std::strtod(f[5 + c].c_str(), nullptr) == expect[c]);
      CHECK(f[13] == r.regime);
      CHECK(std::strtod(f[14].c_str(), nullptr) == r.wall_ms);
    }
    std::istringstream again(os.str());
    const auto parsed = read_csv(again);
    REQUIRE(parsed.size() == rows.size());
    std::ostringstream os2;
    write_csv(os2, parsed);
    CHECK(os2.str() == os.str());
  }

  TEST_CASE("malformed CSV is rejected") {
    std::istringstream bad_header("model,n\n");
    CHECK_THROWS_AS(read_csv(bad_header), Error);
    std::istringstream short_row(std::string(kSweepCsvHeader) + "\nm,1,2\n");
    CHECK_THROWS_AS(read_csv(short_row), Error);
  }

  TEST_CASE("RPolicy parsing") {
    CHECK(RPolicy::parse("optimized").kind == RPolicy::Kind::kOptimized);
    CHECK(RPolicy::parse("moment").kind == RPolicy::Kind::kMoment);
    const auto f = RPolicy::parse("fixed:2.5");
    CHECK(f.kind == RPolicy::Kind::kFixed);
    CHECK(f.fixed_value == 2.5);
    CHECK(f.str() == "fixed:2.5");
    CHECK_THROWS_AS(RPolicy::parse("fixed:"), ConfigError);
    CHECK_THROWS_AS(RPolicy::parse("fixed:-1"), ConfigError);
    CHECK_THROWS_AS(RPolicy::parse("best"), ConfigError);
  }

  TEST_CASE("a one-cell sweep reproduces the regret module") {
    const auto m = ScalarChannelModel::uniform_gaussian(1.0, 0.3);
    const auto rows = sweep_scalar(m, {6}, {5}, 5000, 77);
    REQUIRE(rows.size() == 1);
    const auto& r = rows[0];
    const auto cb = panter_dite_1d(density_of(m.prior()), 6);
    const Matrix fill = eta_cell_fill(cb);
    const auto est =
        estimate_decomposition(joint_model(m, 5), eta_cell_fn(cb), 6, {5000, r.seed, 16, 1}, &fill);
    CHECK(r.mmse.value == est.mmse.value);
    CHECK(r.mmse_k.se == est.mmse_k.se);
    CHECK(r.regret.value == est.regret_direct.value);
    CHECK(r.dist_y == distortion_of_Y(cb, m.prior()));
    CHECK(r.delta == delta(cb, 1.0));
    CHECK(r.regime == "estimation-limited");
    CHECK(r.residual.value == doctest::Approx(est.residual()));
    // Calibrated on its own cell, the bound equals the observed paired gap.
    CHECK(r.bound == doctest::Approx(std::abs(r.gap.value)).epsilon(1e-12));
  }

  TEST_CASE("paired gap tracks regret - dist_y with a smaller standard error") {
    const auto m = ScalarChannelModel::uniform_gaussian(1.0, 0.1);
    const auto rows = sweep_scalar(m, {8}, {100}, 40000, 19);
    REQUIRE(rows.size() == 1);
    const auto& r = rows[0];
    const double unpaired = r.regret.value - r.dist_y;
    CHECK(std::abs(r.gap.value - unpaired) <= 4.0 * r.regret.se);
    CHECK(r.gap.se < 0.5 * r.regret.se);
    CHECK(std::isnan(sweep_vector(LinearGaussianModel::isotropic(2, 1.0), {16}, 500, 3)[0].gap.value));
  }

  TEST_CASE("scalar sweep distortion follows the k^-2 law") {
    const auto m = ScalarChannelModel::uniform_gaussian(1.0, 0.1);
    const auto rows = sweep_scalar(m, {4, 8, 16, 32}, {10000}, 2000, 5);
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows) {
      CHECK(r.error.empty());
      pts.emplace_back(double(r.k), r.dist_y);
    }
    const double s = fit_loglog_slope(pts).slope;
    CHECK(s >= -2.2);
    CHECK(s <= -1.8);
  }

  TEST_CASE("quantization-limited cells track the Y distortion") {
    const auto m = ScalarChannelModel::uniform_gaussian(1.0, 0.1);
    const auto rows = sweep_scalar(m, {4, 8}, {1000}, 10000, 6);
    for (const auto& r : rows) {
      REQUIRE(r.regime == "quantization-limited");
      const double ratio = r.regret.value / r.dist_y;
      CHECK(ratio >= 0.5);
      CHECK(ratio <= 2.0);
    }
  }

  TEST_CASE("sweeps are deterministic and independent of threads") {
    const auto m = ScalarChannelModel::uniform_logistic(1.0, 0.4);
    SweepOptions one;
    SweepOptions many;
    many.threads = 3;
    const auto a = sweep_scalar(m, {2, 5}, {3, 9}, 2000, 11, one);
    const auto b = sweep_scalar(m, {2, 5}, {3, 9}, 2000, 11, many);
    CHECK(without_wall_time(a) == without_wall_time(b));
    const auto c = sweep_scalar(m, {2, 5}, {3, 9}, 2000, 12, one);
    CHECK(without_wall_time(a) != without_wall_time(c));
    // n-major order.
    CHECK(a[0].n == 3);
    CHECK(a[1].n == 3);
    CHECK(a[1].k == 5);
    CHECK(a[2].n == 9);
  }

  TEST_CASE("failed cells are recorded and the sweep continues") {
    const auto lg = LinearGaussianModel::isotropic(2, 1.0);
    const auto rows = sweep_vector(lg, {16, 0, 32}, 2000, 3);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].error.empty());
    CHECK(rows[1].regime == "error");
    CHECK_FALSE(rows[1].error.empty());
    CHECK(std::isnan(rows[1].regret.value));
    CHECK(rows[2].error.empty());
    std::ostringstream os;
    write_json(os, rows);
    const auto j = nlohmann::json::parse(os.str());
    REQUIRE(j.size() == 3);
    CHECK(j[1]["regret"].is_null());
    CHECK(j[1]["regime"] == "error");
    CHECK(j[0].at("r").get<double>() > 0.0);
  }

  TEST_CASE("vector sweep on p=1 drives the regret down") {
    const auto lg = LinearGaussianModel::scalar(1.0, 1.0, 1.0);
    const auto rows = sweep_vector(lg, {4, 16, 64, 256}, 20000, 8);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].regret.value < rows[i - 1].regret.value);
    for (const auto& r : rows) {
      CHECK(r.radius > *lg.known_moments().mean_norm);
      CHECK(r.cells == r.k + 1);
    }
    CHECK(rows[0].bound == doctest::Approx(rows[0].regret.value).epsilon(1e-12));
  }

  TEST_CASE("vector sweep radius policies") {
    const auto lg = LinearGaussianModel::isotropic(2, 1.0);
    const auto fixed = sweep_vector(lg, {16}, 2000, 1, RPolicy::parse("fixed:1.5"));
    CHECK(fixed[0].radius == 1.5);
    const auto km = lg.known_moments();
    const auto moment = sweep_vector(lg, {16}, 2000, 1, RPolicy::parse("moment"));
    CHECK(moment[0].radius == doctest::Approx(moment_balance_radius(*km.mean_sq_norm, *km.mean_fourth_norm, 16, 2)));
  }

  TEST_CASE("sweep inputs are validated") {
    const auto m = ScalarChannelModel::uniform_gaussian(1.0, 0.1);
    CHECK_THROWS_AS(sweep_scalar(m, {}, {1}, 1000, 1), InvalidInputError);
    CHECK_THROWS_AS(sweep_vector(LinearGaussianModel::isotropic(2, 1.0), {}, 1000, 1), InvalidInputError);
  }
}
