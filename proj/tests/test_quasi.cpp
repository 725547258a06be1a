#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "qproc/levy.hpp"
#include "qproc/numerics.hpp"
#include "qproc/path.hpp"
#include "qproc/quasi.hpp"

using namespace qproc;

namespace {

class TerminalFunctional : public PathFunctional {
 public:
  std::size_t theta_dim() const override { return 1; }
  double evaluate(const SteppedPath& p, std::span<const double>) const override {
    return p.terminal();
  }
};

class RuinTimeFunctional : public PathFunctional {
 public:
  explicit RuinTimeFunctional(double xi) : xi_(xi) {}
  std::size_t theta_dim() const override { return 1; }
  double evaluate(const SteppedPath& p, std::span<const double>) const override {
    return ruin_time(p, xi_);
  }

 private:
  double xi_;
};

const double kTheta = 0.0;
const std::span<const double> kThetaSpan(&kTheta, 1);

}  // namespace

TEST_CASE("sampled permutations are valid bijections, deterministic in the seed") {
  const auto a = sample_permutation_set(52, 100, 99);
  const auto b = sample_permutation_set(52, 100, 99);
  REQUIRE(a.size() == 100);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].is_valid());
    CHECK(a[i].mapping == b[i].mapping);
  }
  const auto c = sample_permutation_set(52, 100, 100);
  CHECK(a.front().mapping != c.front().mapping);
}

TEST_CASE("n=1 yields alpha copies of the identity") {
  const auto perms = sample_permutation_set(1, 5, 3);
  REQUIRE(perms.size() == 5);
  for (const auto& p : perms) CHECK(p.mapping == std::vector<std::uint32_t>{0});
}

TEST_CASE("n=3 permutation frequencies are uniform within 3 SE") {
  // multinomial: p = 1/6, se = sqrt(p(1-p)/N)
  const std::size_t N = 6000;
  const auto perms = sample_permutation_set(3, N, 12345);
  std::map<std::vector<std::uint32_t>, std::size_t> counts;
  for (const auto& p : perms) ++counts[p.mapping];
  REQUIRE(counts.size() == 6);
  const double p = 1.0 / 6.0;
  const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(N));
  for (const auto& [perm, n] : counts)
    CHECK(std::abs(static_cast<double>(n) / static_cast<double>(N) - p) <= 3.0 * se);
}

TEST_CASE("enumerate_all_permutations: counts and lexicographic order") {
  CHECK(enumerate_all_permutations(1).size() == 1);
  const auto p3 = enumerate_all_permutations(3);
  REQUIRE(p3.size() == 6);
  CHECK(p3.front().mapping == std::vector<std::uint32_t>{0, 1, 2});
  CHECK(p3.back().mapping == std::vector<std::uint32_t>{2, 1, 0});
  for (std::size_t i = 1; i < p3.size(); ++i) CHECK(p3[i - 1].mapping < p3[i].mapping);
  CHECK(enumerate_all_permutations(8).size() == 40320);
  CHECK_THROWS_AS(enumerate_all_permutations(9), parameter_error);
  CHECK_THROWS_AS(enumerate_all_permutations(0), parameter_error);
}

TEST_CASE("quasi paths: identity, hand-computed permutation, terminal pinning") {
  const IncrementVector inc{1.0, -2.0, 3.0};
  Permutation perm;
  perm.mapping = {2, 0, 1};  // one-based (3,1,2) in 0-based indices
  QuasiEnsemble ens(inc, 0.0, 1.0, {Permutation::identity(3), perm});

  const SteppedPath observed = ens.observed_path();
  CHECK(ens.quasi_path(0).values() == observed.values());
  CHECK(ens.quasi_path(1).values() == std::vector<double>{0.0, 3.0, 4.0, 2.0});
  CHECK(ens.quasi_path(1).terminal() == observed.terminal());
  CHECK_THROWS_AS(ens.quasi_path(2), parameter_error);
}

TEST_CASE("every quasi terminal is bit-identical to the observed terminal") {
  RngStream rng(88, 0);
  const JumpDiffusionModel model{0.0, 20.0, 10.0, 5.0, 3.0, -1};
  const auto inc = simulate_increments(model, SamplingScheme{64, 0.25}, rng);
  QuasiEnsemble ens(inc, 0.0, 0.25, sample_permutation_set(64, 50, 5));
  const double terminal = ens.observed_path().terminal();
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const SteppedPath q = ens.quasi_path(i);
    CHECK(q.terminal() == terminal);
    // multiset of increments is preserved exactly
    std::vector<double> steps;
    for (std::size_t k = 1; k < q.values().size(); ++k) steps.push_back(q[k] - q[k - 1]);
    // (differences are recomputed floats; compare the sorted permuted inputs instead)
    std::vector<double> expect(inc);
    std::sort(expect.begin(), expect.end());
    std::vector<double> got;
    for (auto idx : ens.permutations()[i].mapping) got.push_back(inc[idx]);
    std::sort(got.begin(), got.end());
    CHECK(got == expect);
  }
}

TEST_CASE("prefix materialization matches the full path's head") {
  const IncrementVector inc{1.0, 2.0, 3.0, 4.0};
  Permutation perm;
  perm.mapping = {3, 1, 0, 2};
  QuasiEnsemble ens(inc, 1.0, 0.5, {perm});
  const SteppedPath full = ens.quasi_path(0);
  const SteppedPath head = ens.quasi_path_prefix(0, 2);
  REQUIRE(head.n_increments() == 2);
  for (std::size_t k = 0; k <= 2; ++k) CHECK(head[k] == full[k]);
}

TEST_CASE("empirical expectation: single atom, terminal invariance, exhaustive oracle") {
  RngStream rng(21, 0);
  const JumpDiffusionModel model{0.0, 20.0, 10.0, 5.0, 3.0, -1};
  const auto inc = simulate_increments(model, SamplingScheme{4, 0.5}, rng);

  QuasiEnsemble single(inc, 0.0, 0.5, {Permutation::identity(4)});
  const RuinTimeFunctional tau(-1.0);
  CHECK(empirical_expectation(single, tau, kThetaSpan) ==
        tau.evaluate(single.observed_path(), kThetaSpan));

  const TerminalFunctional term;
  QuasiEnsemble random_ens(inc, 0.0, 0.5, sample_permutation_set(4, 7, 2));
  QuasiEnsemble full_ens(inc, 0.0, 0.5, enumerate_all_permutations(4));
  const double observed_terminal = single.observed_path().terminal();
  CHECK(empirical_expectation(random_ens, term, kThetaSpan) == observed_terminal);
  CHECK(empirical_expectation(full_ens, term, kThetaSpan) == observed_terminal);

  // exhaustive oracle for the ruin time over all 24 permutations
  double brute = 0.0;
  for (const auto& p : enumerate_all_permutations(4)) {
    std::vector<double> vals{0.0};
    for (auto idx : p.mapping) vals.push_back(vals.back() + inc[idx]);
    vals.back() = observed_terminal;  // terminal pinning, as in the ensemble
    brute += ruin_time(SteppedPath(0.0, 0.5, vals), -1.0);
  }
  brute /= 24.0;
  CHECK(empirical_expectation(full_ens, tau, kThetaSpan) == Catch::Approx(brute).margin(1e-12));
}

TEST_CASE("ensemble validation") {
  const IncrementVector inc{1.0, 2.0};
  CHECK_THROWS_AS(QuasiEnsemble(inc, 0.0, 0.0, {Permutation::identity(2)}), parameter_error);
  CHECK_THROWS_AS(QuasiEnsemble(inc, 0.0, 1.0, {}), parameter_error);
  CHECK_THROWS_AS(QuasiEnsemble(inc, 0.0, 1.0, {Permutation::identity(3)}), parameter_error);
  CHECK_THROWS_AS(sample_permutation_set(0, 1, 1), parameter_error);
  CHECK_THROWS_AS(sample_permutation_set(3, 0, 1), parameter_error);
}

TEST_CASE("contrast variance scales like 1/alpha across permutation seeds") {
  RngStream rng(5, 0);
  const JumpDiffusionModel model{0.0, 20.0, 10.0, 5.0, 3.0, -1};
  const SamplingScheme cell{200, 0.1};
  const auto inc = simulate_increments(model, cell, rng);
  const RuinTimeFunctional tau(-3.0);

  auto variance_at = [&](std::size_t alpha) {
    std::vector<double> vals;
    for (std::uint64_t seed = 1; seed <= 150; ++seed) {
      QuasiEnsemble ens(inc, 0.0, cell.h, sample_permutation_set(cell.n, alpha, seed));
      vals.push_back(empirical_expectation(ens, tau, kThetaSpan));
    }
    return sample_stats(vals).variance;
  };
  const double ratio = variance_at(64) / variance_at(16);
  // iid-conditional structure: quadrupling alpha divides the variance by ~4
  CHECK(ratio > 0.12);
  CHECK(ratio < 0.5);
}
