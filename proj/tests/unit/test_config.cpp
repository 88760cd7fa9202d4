#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mmseq/config.hpp"
#include "mmseq/errors.hpp"

using namespace mmseq;

TEST_SUITE("config") {
  TEST_CASE("parses keys, sections, comments and quotes") {
    const auto cfg = KeyValueConfig::parse_string(
        "# scalar sweep\n"
        "model.kind = uniform-gaussian   # trailing comment\n"
        "model.A = 1\n"
        "\n"
        "[model]\n"
        "sigma = 0.1\n"
        "[sweep]\n"
        "k = 4, 8 16\n"
        "n = [100, 1000]\n"
        "r_policy = \"fixed:2\"\n");
    CHECK(cfg.require("model.kind") == "uniform-gaussian");
    CHECK(cfg.get_double("model.sigma") == 0.1);
    CHECK(cfg.get_size_list("sweep.k") == std::vector<std::size_t>{4, 8, 16});
    CHECK(cfg.get_size_list("sweep.n") == std::vector<std::size_t>{100, 1000});
    CHECK(cfg.get_string("sweep.r_policy", "") == "fixed:2");
    CHECK(cfg.get_size("sweep.N", 7) == 7);
    CHECK(cfg.get_bool("sweep.calibrate", true));
  }

  TEST_CASE("strict parser errors") {
    CHECK_THROWS_AS(KeyValueConfig::parse_string("model.knd = x\n"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse_string("model.A = 1\nmodel.A = 2\n"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse_string("model.A\n"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse_string("model.A =\n"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse_string("[]\n"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse_string("[bogus]\nA = 1\n"), ConfigError);
    const auto cfg = KeyValueConfig::parse_string("model.A = abc\nsweep.N = -3\nsweep.calibrate = maybe\n");
    CHECK_THROWS_AS(cfg.get_double("model.A"), ConfigError);
    CHECK_THROWS_AS(cfg.get_size("sweep.N"), ConfigError);
    CHECK_THROWS_AS(cfg.get_bool("sweep.calibrate", true), ConfigError);
    CHECK_THROWS_AS(cfg.require("model.kind"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::load("/nonexistent/file.cfg"), ConfigError);
    KeyValueConfig c2;
    CHECK_THROWS_AS(c2.set("sweep.bogus", "1"), ConfigError);
  }

  TEST_CASE("the documented key set covers the model, sweep and bounds blocks") {
    const auto& keys = known_config_keys();
    for (const char* k : {"model.kind", "model.A", "model.sigma", "model.p", "model.n", "model.seed",
                          "sweep.k", "sweep.n", "sweep.N", "sweep.seed", "sweep.r_policy", "bounds.L"}) {
      CHECK(std::find(keys.begin(), keys.end(), k) != keys.end());
    }
  }

  TEST_CASE("matrices") {
    const auto cfg = KeyValueConfig::parse_string(
        "model.sigma_y = [[2, 0.5], [0.5, 1]]\nmodel.h = [1, 2]\nmodel.sigma_w = 3\n");
    const Matrix sy = cfg.get_matrix("model.sigma_y");
    CHECK(sy.rows() == 2);
    CHECK(sy(0, 1) == 0.5);
    const Matrix h = cfg.get_matrix("model.h");
    CHECK(h.rows() == 2);
    CHECK(h.cols() == 1);
    CHECK(cfg.get_matrix("model.sigma_w")(0, 0) == 3.0);
    const auto bad = KeyValueConfig::parse_string("model.h = [[1, 2], [3]]\n");
    CHECK_THROWS_AS(bad.get_matrix("model.h"), ConfigError);
  }

  TEST_CASE("model specs") {
    const auto s = model_spec(KeyValueConfig::parse_string(
        "model.kind = uniform-logistic\nmodel.A = 2\nmodel.sigma = 0.3\nmodel.seed = 9\n"));
    CHECK(s.kind == ModelKind::kUniformLogistic);
    CHECK(s.seed == 9);
    const auto m = make_scalar_model(s);
    CHECK(m.half_width() == 2.0);
    CHECK(m.fisher(0.0) == doctest::Approx(1.0 / (3.0 * 0.09)));

    CHECK_THROWS_AS(model_spec(KeyValueConfig::parse_string("model.kind = uniform-gaussian\nmodel.A = 1\n")),
                    ConfigError);
    CHECK_THROWS_AS(model_spec(KeyValueConfig::parse_string("model.kind = gamma\n")), ConfigError);
    CHECK_NOTHROW(model_spec(KeyValueConfig::parse_string("model.kind = uniform-noiseless\nmodel.A = 1\n")));

    const auto iso = model_spec(KeyValueConfig::parse_string("model.kind = linear-gaussian\nmodel.p = 3\n"));
    CHECK(make_linear_model(iso).p() == 3);
    CHECK(closed_form_mmse(make_linear_model(iso)) == doctest::Approx(1.5));

    const auto full = model_spec(KeyValueConfig::parse_string(
        "model.kind = linear-gaussian\nmodel.sigma_y = 1\nmodel.h = 1\nmodel.sigma_w = 1\n"));
    CHECK(closed_form_mmse(make_linear_model(full)) == doctest::Approx(0.5));
    CHECK_THROWS_AS(make_scalar_model(full), ConfigError);
  }

  TEST_CASE("sweep specs") {
    const auto scalar = sweep_spec(KeyValueConfig::parse_string(
        "model.kind = uniform-gaussian\nmodel.A = 1\nmodel.sigma = 0.1\nmodel.seed = 4\n"
        "sweep.k = 4, 8\nsweep.n = 100\nsweep.N = 5000\n"));
    CHECK(scalar.seed == 4);
    CHECK(scalar.N == 5000);
    CHECK(scalar.k.size() == 2);

    const auto vec = sweep_spec(KeyValueConfig::parse_string(
        "model.kind = linear-gaussian\nmodel.p = 2\nsweep.k = 16\nsweep.r_policy = moment\n"
        "sweep.seed = 3\nbounds.c1 = 2\n"));
    CHECK(vec.r_policy.kind == RPolicy::Kind::kMoment);
    CHECK(vec.seed == 3);
    CHECK(vec.options.config.c1 == 2.0);

    CHECK_THROWS_AS(sweep_spec(KeyValueConfig::parse_string(
                        "model.kind = uniform-gaussian\nmodel.A = 1\nmodel.sigma = 0.1\nsweep.k = 4\n")),
                    ConfigError);
    CHECK_THROWS_AS(sweep_spec(KeyValueConfig::parse_string(
                        "model.kind = linear-gaussian\nmodel.p = 2\nsweep.k = 4\nsweep.n = 3\n")),
                    ConfigError);
    CHECK_THROWS_AS(sweep_spec(KeyValueConfig::parse_string(
                        "model.kind = linear-gaussian\nmodel.p = 2\nsweep.k = 4\nsweep.N = 10\n")),
                    ConfigError);
    CHECK_THROWS_AS(sweep_spec(KeyValueConfig::parse_string(
                        "model.kind = linear-gaussian\nmodel.p = 2\nsweep.k = 4\nbounds.L = -1\n")),
                    ConfigError);
  }

  TEST_CASE("bound requests") {
    const auto req = bound_request(KeyValueConfig::parse_string(
        "[bounds]\nname = corollary\nk = 10\nn = 1000000\ne_inv_sqrt_fisher = 1\nmmse = 0\nc_corollary = 3\n"));
    CHECK(req.name == "corollary");
    CHECK(req.config.c_corollary == 3.0);
    CHECK(evaluate_bound(req).value == doctest::Approx(3e-4));
    const auto gap = bound_request(KeyValueConfig::parse_string(
        "bounds.name = info-gap\nbounds.n = 10\nbounds.mmse = 0.002\n"
        "model.kind = uniform-gaussian\nmodel.A = 1\nmodel.sigma = 0.1\n"));
    REQUIRE(gap.model.has_value());
    CHECK(evaluate_bound(gap).value == doctest::Approx(0.001));
  }

  TEST_CASE("shipped example configs parse") {
    const std::filesystem::path dir = MMSEQ_CONFIG_DIR;
    std::size_t seen = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.path().extension() != ".cfg") continue;
      ++seen;
      const auto cfg = KeyValueConfig::load(entry.path());
      if (cfg.has("sweep.k")) {
        CHECK_NOTHROW(sweep_spec(cfg));
      } else if (cfg.has("bounds.name")) {
        CHECK_NOTHROW(evaluate_bound(bound_request(cfg)));
      } else {
        CHECK_NOTHROW(model_spec(cfg));
      }
    }
    CHECK(seen >= 4);
  }
}
