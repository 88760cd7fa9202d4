#include <doctest.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "mmseq/chunked.hpp"
#include "mmseq/errors.hpp"
#include "mmseq/quadrature.hpp"
#include "mmseq/rng.hpp"
#include "mmseq/stats.hpp"

using namespace mmseq;

TEST_SUITE("core") {
  TEST_CASE("derive_seed is position determined") {
    CHECK(derive_seed(7, 1, 3) == derive_seed(7, 1, 3));
    CHECK(derive_seed(7, 1, 3) != derive_seed(7, 1, 4));
    CHECK(derive_seed(7, 1, 3) != derive_seed(7, 2, 3));
    CHECK(derive_seed(7, 1, 3) != derive_seed(8, 1, 3));
    Engine a = make_engine(11, 2, 5);
    Engine b = make_engine(11, 2, 5);
    for (int i = 0; i < 100; ++i) CHECK(a() == b());
  }

  TEST_CASE("simpson integrates cubics exactly") {
    const double v = simpson([](double x) { return x * x * x - 2 * x + 1; }, -1.0, 2.0, 2);
    CHECK(v == doctest::Approx(3.75 - 3.0 + 3.0).epsilon(1e-14));
    SimpsonGrid grid(0.0, std::numbers::pi, 4097);
    CHECK(grid.integrate([](double x) { return std::sin(x); }) ==
          doctest::Approx(2.0).epsilon(1e-12));
    CHECK(grid.size() == 4097);
    CHECK(grid.nodes().front() == 0.0);
    CHECK(grid.nodes().back() == doctest::Approx(std::numbers::pi));
  }

  TEST_CASE("log_sum_exp is stable") {
    std::vector<double> big{1000.0, 1000.0};
    CHECK(log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)));
    std::vector<double> none;
    CHECK(std::isinf(log_sum_exp(none)));
    const double ninf = -std::numeric_limits<double>::infinity();
    std::vector<double> all_ninf{ninf, ninf};
    CHECK(log_sum_exp(all_ninf) == ninf);
  }

  TEST_CASE("running moments merge equals sequential pass") {
    Engine eng(3);
    std::normal_distribution<double> nd(1.0, 2.0);
    RunningMoments all;
    RunningMoments a;
    RunningMoments b;
    for (int i = 0; i < 5000; ++i) {
      const double x = nd(eng);
      all.add(x);
      (i < 1700 ? a : b).add(x);
    }
    a.merge(b);
    CHECK(a.count() == all.count());
    CHECK(a.mean() == doctest::Approx(all.mean()).epsilon(1e-12));
    CHECK(a.variance() == doctest::Approx(all.variance()).epsilon(1e-12));
    CHECK(all.standard_error() == doctest::Approx(std::sqrt(all.variance() / 5000)));
    RunningMoments empty;
    empty.merge(all);
    CHECK(empty.mean() == all.mean());
  }

  TEST_CASE("chunk_size partitions the total") {
    std::size_t sum = 0;
    for (std::size_t c = 0; c < 7; ++c) sum += chunk_size(100, 7, c);
    CHECK(sum == 100);
    CHECK(chunk_size(100, 7, 0) >= chunk_size(100, 7, 6));
  }

  TEST_CASE("run_chunks visits every chunk once under threads") {
    for (std::size_t threads : {1u, 3u}) {
      std::vector<std::atomic<int>> hits(10);
      run_chunks(10, threads, [&](std::size_t c) { hits[c]++; });
      for (auto& h : hits) CHECK(h.load() == 1);
    }
  }

  TEST_CASE("run_chunks rethrows the lowest-index failure") {
    for (std::size_t threads : {1u, 4u}) {
      try {
        run_chunks(8, threads, [](std::size_t c) {
          if (c == 5) throw DomainError("five");
          if (c == 2) throw InvalidInputError("two");
        });
        FAIL("no exception");
      } catch (const Error& e) {
        CHECK(std::string(e.what()) == "two");
        CHECK(e.kind() == ErrorKind::kInvalidInput);
      }
    }
  }

  TEST_CASE("error kinds print their names") {
    CHECK(to_string(ErrorKind::kConfig) == "config");
    CHECK(to_string(ErrorKind::kNumericalDegeneracy) == "numerical-degeneracy");
    CHECK(to_string(ErrorKind::kConvergence) == "convergence");
    ConvergenceError ce("x", {1.0, 2.0});
    CHECK(ce.last_iterate().size() == 2);
  }
}
