#include <cmath>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "qproc/numerics.hpp"
#include "qproc/rng.hpp"

using namespace qproc;

TEST_CASE("streams are deterministic and distinct") {
  RngStream a(123, 0), b(123, 0), c(123, 1);
  std::vector<double> va, vb, vc;
  for (int i = 0; i < 100; ++i) {
    va.push_back(a.uniform());
    vb.push_back(b.uniform());
    vc.push_back(c.uniform());
  }
  CHECK(va == vb);
  CHECK(va != vc);
}

TEST_CASE("uniform stays in [0,1) and is roughly flat") {
  RngStream rng(7, 0);
  int buckets[10] = {};
  const int N = 100000;
  for (int i = 0; i < N; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    ++buckets[static_cast<int>(u * 10.0)];
  }
  for (int b : buckets) CHECK(std::abs(b - N / 10) < 5 * std::sqrt(N / 10.0));
}

TEST_CASE("uniform_below covers its range and rejects zero") {
  RngStream rng(11, 0);
  CHECK_THROWS_AS(rng.uniform_below(0), parameter_error);
  bool seen[7] = {};
  for (int i = 0; i < 1000; ++i) {
    const auto v = rng.uniform_below(7);
    REQUIRE(v < 7);
    seen[v] = true;
  }
  for (bool s : seen) CHECK(s);
}

TEST_CASE("normal moments match a standard normal") {
  RngStream rng(42, 0);
  const std::size_t N = 200000;
  std::vector<double> x(N);
  for (double& v : x) v = rng.normal();
  const SampleStats s = sample_stats(x);
  // 3 standard errors: se(mean)=1/sqrt(N), se(var)~sqrt(2/N)
  CHECK(std::abs(s.mean) < 3.0 / std::sqrt(static_cast<double>(N)));
  CHECK(std::abs(s.variance - 1.0) < 3.0 * std::sqrt(2.0 / static_cast<double>(N)));
}

TEST_CASE("exponential has the requested mean") {
  RngStream rng(43, 0);
  const std::size_t N = 200000;
  std::vector<double> x(N);
  for (double& v : x) {
    v = rng.exponential(3.0);
    REQUIRE(v >= 0.0);
  }
  const SampleStats s = sample_stats(x);
  CHECK(std::abs(s.mean - 3.0) < 3.0 * 3.0 / std::sqrt(static_cast<double>(N)));
}

TEST_CASE("poisson mean and variance, small and chunked regimes") {
  for (double mean : {0.0, 2.5, 75.0}) {
    RngStream rng(44, static_cast<std::uint64_t>(mean * 10));
    const std::size_t N = 100000;
    std::vector<double> x(N);
    for (double& v : x) v = static_cast<double>(rng.poisson(mean));
    const SampleStats s = sample_stats(x);
    const double se = std::sqrt(std::max(mean, 1e-12) / static_cast<double>(N));
    CHECK(std::abs(s.mean - mean) <= 3.0 * se + 1e-12);
    if (mean > 0.0) CHECK(std::abs(s.variance / mean - 1.0) < 0.05);
  }
  RngStream rng(44, 99);
  CHECK_THROWS_AS(rng.poisson(-1.0), parameter_error);
}

TEST_CASE("generator id is pinned") {
  CHECK(std::string(RngStream::kGeneratorId) == "mt19937_64/box-muller/v1");
}
