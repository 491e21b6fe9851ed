#include <catch_amalgamated.hpp>

#include <cmath>
#include <utility>
#include <vector>

#include "uerw/walker.hpp"

using namespace uerw;

namespace {

double rel_err(double got, double want) { return std::fabs(got - want) / std::fabs(want); }

// Σ_{k<=n} μ_k X_k from the bits, with μ from the log-gamma form.
double sigma_from_scratch(const Trajectory& t) {
  long double acc = 0.0L;
  for (std::uint64_t k = 1; k <= t.n(); ++k) {
    if (t.x(k)) acc += mu(t.params(), k);
  }
  return static_cast<double>(acc);
}

}  // namespace

TEST_CASE("helpers: packed bits and compensated sum") {
  PackedBits b;
  for (int i = 0; i < 200; ++i) b.push_back(i % 3 == 0);
  CHECK(b.size() == 200);
  CHECK(b.get(1));
  CHECK_FALSE(b.get(2));
  CHECK(b.get(130));
  CHECK(b.count() == 67);

  CompensatedSum s;
  s.add(1e16);
  for (int i = 0; i < 1000; ++i) s.add(1.0);
  s.add(-1e16);
  CHECK(s.value() == 1000.0);
}

TEST_CASE("checkpoint grid") {
  const auto g = CheckpointGrid::geometric(100);
  const std::vector<std::uint64_t> want = {1, 2, 3, 4, 5, 6, 7, 8, 9, 11, 13, 16, 19, 23, 27, 32, 39, 47, 56, 67, 80, 96, 100};
  CHECK(g.points() == want);
  const std::vector<std::uint64_t> extra = {7, 250, 100};
  const auto h = CheckpointGrid::geometric(100, 1.2, extra);
  CHECK(std::count(h.points().begin(), h.points().end(), 7) == 1);
  CHECK(h.points().back() == 100);
  CHECK_THROWS_AS(CheckpointGrid::geometric(10, 1.0), DomainError);
}

TEST_CASE("initial state") {
  const auto t = simulate(ModelParams(0.5, 0.3), 1, 9);
  CHECK(t.n() == 1);
  CHECK(t.s() == 1);
  CHECK(t.sigma() == 1.0);
  CHECK(t.martingale() == 1.0);
  CHECK(t.martingale_value(1) == 1.0);
  CHECK(t.x(1));
}

TEST_CASE("step semantics") {
  const ModelParams params(0.4, 0.5);
  Trajectory t(params);
  t.step(0.9, 0.5);  // coin >= p
  CHECK_FALSE(t.x(2));
  Trajectory u(params);
  u.step(0.1, 0.77);  // only X_1 to copy
  CHECK(u.x(2));
  CHECK(u.s() == 2);
  CHECK(rel_err(u.sigma(), 1.0 + mu(params, 2)) < 1e-15);
}

TEST_CASE("always-successful copies with uniform memory give all ones") {
  // coin = 0 succeeds for every p, which realizes the p -> 1 walk.
  const ModelParams params(0.6, 0.0);
  Trajectory t(params);
  for (int i = 0; i < 999; ++i) t.step(0.0, (i + 0.5) / 999.0);
  CHECK(t.s() == 1000);
  CHECK(t.sigma() == 1000.0);
  // M_n = n / c_n(p) here; with every coin succeeding the conditional mean is p·S/n.
  CHECK(rel_err(t.conditional_mean_next(), 0.6) < 1e-14);
}

TEST_CASE("conditional mean examples") {
  for (double b : {-0.5, 0.0, 1.0, 3.0}) {
    const Trajectory t(ModelParams(0.35, b));
    CHECK(rel_err(t.conditional_mean_next(), 0.35) < 1e-14);
  }
  const ModelParams flat(0.7, 0.0);
  const auto t = simulate(flat, 5000, 3);
  CHECK(rel_err(t.conditional_mean_next(), 0.7 * static_cast<double>(t.s()) / 5000.0) < 1e-12);
}

TEST_CASE("one-step martingale identity holds on every visited state") {
  const std::vector<std::pair<double, double>> grid = {{0.5, -0.5}, {0.7, 0.0}, {0.7, 0.5}, {0.5, 1.0}, {0.5, 2.0}};
  for (const auto& [p, b] : grid) {
    const ModelParams params(p, b);
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      Trajectory t(params, {}, false, 20000);
      const rng::StepStream stream(seed, 0);
      while (t.n() < 20000) {
        const std::uint64_t n = t.n();
        if (n % 97 == 1) {
          const double lhs = (t.sigma() + t.mu_next() * t.conditional_mean_next()) / c(params.drift(), n + 1);
          const double rhs = t.sigma() / c(params.drift(), n);
          REQUIRE(rel_err(lhs, rhs) < 1e-12);
        }
        t.step(stream.draws(n));
      }
    }
  }
}

TEST_CASE("trajectory invariants") {
  const std::vector<std::pair<double, double>> grid = {{0.5, -0.5}, {0.7, 0.0}, {0.7, 0.5}, {0.5, 1.0}, {0.5, 2.0},
                                                       {0.9, -0.9}};
  for (const auto& [p, b] : grid) {
    const ModelParams params(p, b);
    const auto t = simulate(params, 50000, 17, CheckpointGrid::geometric(50000));
    INFO("p = " << p << ", beta = " << b);
    CHECK(t.x(1));
    CHECK(t.s() == t.bits().count());
    CHECK(rel_err(t.sigma(), sigma_from_scratch(t)) < 1e-9);
    CHECK(t.martingale() > 0.0);
    std::uint64_t prev_s = 0;
    double prev_sigma = 0.0;
    for (const auto& cp : t.checkpoints()) {
      CHECK(cp.s >= prev_s);
      CHECK(cp.sigma >= prev_sigma);
      CHECK(cp.sigma >= 1.0);
      CHECK(rel_err(cp.m, cp.sigma / c(params.drift(), cp.n)) < 1e-12);
      CHECK(cp.last_one <= cp.n);
      CHECK(t.x(cp.last_one));
      prev_s = cp.s;
      prev_sigma = cp.sigma;
    }
    CHECK(t.checkpoints().back().n == 50000);
  }
}

TEST_CASE("Sigma increases by exactly mu_{n+1} on a 1-step") {
  const ModelParams params(0.8, 0.6);
  Trajectory t(params);
  const rng::StepStream stream(5, 2);
  for (int i = 0; i < 3000; ++i) {
    const double before = t.sigma();
    const double mu_new = t.mu_next();
    const std::uint64_t s_before = t.s();
    t.step(stream.draws(t.n()));
    if (t.x(t.n())) {
      CHECK(t.s() == s_before + 1);
      CHECK(std::fabs(t.sigma() - (before + mu_new)) <= 1e-15 * t.sigma());
    } else {
      CHECK(t.sigma() == before);
    }
  }
}

TEST_CASE("martingale differences match the normalized Sigma increment") {
  // M_{n+1} − M_n = (μ_{n+1} X_{n+1} − μ_{n+1} E[X_{n+1}|F_n]) / c_{n+1}(p(β+1)).
  const ModelParams params(0.6, 0.4);
  Trajectory t(params);
  const rng::StepStream stream(11, 0);
  for (int i = 0; i < 2000; ++i) {
    const std::uint64_t n = t.n();
    const double m_before = t.martingale();
    const double mu_new = t.mu_next();
    const double q = t.conditional_mean_next();
    t.step(stream.draws(n));
    const double x = t.x(n + 1) ? 1.0 : 0.0;
    const double want = mu_new * (x - q) / c(params.drift(), n + 1);
    CHECK(std::fabs((t.martingale() - m_before) - want) < 1e-12 * std::max(1.0, m_before));
  }
}

TEST_CASE("martingale_value lookups") {
  const auto t = simulate(ModelParams(0.5, 0.0), 100, 1, CheckpointGrid::explicit_points({10, 50, 100}));
  CHECK(t.martingale_value(100) == t.martingale());
  CHECK(t.martingale_value(10) == t.checkpoints()[0].m);
  CHECK_THROWS_AS(t.martingale_value(11), DomainError);
}

TEST_CASE("simulation is deterministic") {
  const ModelParams params(0.7, 0.5);
  const auto a = simulate(params, 20000, 123, CheckpointGrid::geometric(20000), true, 4);
  const auto b = simulate(params, 20000, 123, CheckpointGrid::geometric(20000), true, 4);
  const auto c2 = simulate(params, 20000, 123, CheckpointGrid::geometric(20000), true, 5);
  CHECK(a.bits() == b.bits());
  CHECK(a.checkpoints() == b.checkpoints());
  CHECK(a.sigma() == b.sigma());
  CHECK_FALSE(a.bits() == c2.bits());
  // Link tracking does not alter the path.
  const auto plain = simulate(params, 20000, 123, CheckpointGrid::geometric(20000), false, 4);
  CHECK(plain.bits() == a.bits());
}

TEST_CASE("replay from links reproduces the bits") {
  for (double b : {-0.5, 0.0, 0.5, 2.0}) {
    const auto t = simulate(ModelParams(0.6, b), 30000, 77, {}, true);
    CHECK(replay_bits(t) == t.bits());
    for (std::uint64_t k = 2; k <= t.n(); k += 101) {
      const auto l = t.link(k);
      CHECK(l.drawn >= 1);
      CHECK(l.drawn < k);
    }
  }
  const auto untracked = simulate(ModelParams(0.6, 0.0), 10, 1);
  CHECK_THROWS_AS(untracked.link(2), DomainError);
}

TEST_CASE("forced steps") {
  Trajectory t(ModelParams(0.5, 0.0), {}, true);
  t.step_forced(true, 1);
  t.step_forced(false, 2);
  t.step_forced(true, 3);
  t.step_forced(true, 2);
  CHECK(t.x(2));
  CHECK_FALSE(t.x(3));
  CHECK_FALSE(t.x(4));
  CHECK(t.x(5));
  CHECK_THROWS_AS(t.step_forced(true, 6), DomainError);
}

TEST_CASE("memory budget") {
  CHECK_THROWS_AS(simulate(ModelParams(0.5, 0.0), 1000000, 1, {}, false, 0, 1000), ResourceError);
  CHECK_THROWS_AS(check_budget(std::uint64_t{1} << 31, false, ~std::uint64_t{0}), ResourceError);
  CHECK_NOTHROW(check_budget(1000, true, 1 << 20));
  CHECK_THROWS_AS(simulate(ModelParams(0.5, 0.0), 0, 1), DomainError);
}

// S_n = C·Γ(n+d)/Γ(n+β)·M_n − (β/θ)(1 + Σ_{j=2..n} (X_j − E[X_j | past])),
// with d = p(β+1). The offset −β/θ is part of W_n and fades like n^{−θ/2}.
TEST_CASE("exact decomposition of S_n into martingale and compensator parts") {
  const std::vector<std::pair<double, double>> grid = {{0.7, 0.5}, {0.7, 0.0}, {0.5, -0.5}, {0.9, 1.5}};
  for (const auto& [p, b] : grid) {
    const ModelParams params(p, b);
    const double d = params.drift(), th = params.theta(), big = big_C(params);
    const auto t = simulate(params, 50000, 3);
    double sigma = 1.0, h = 0.0;
    std::uint64_t s = 1;
    for (std::uint64_t j = 2; j <= t.n(); ++j) {
      h += (t.x(j) ? 1.0 : 0.0) - d * sigma / (double(j - 1) * mu(params, j));
      if (t.x(j)) {
        sigma += mu(params, j);
        ++s;
      }
      if (j == 10 || j == 1000 || j == 50000) {
        const double m = sigma / c(d, j);
        const double gr = std::exp(special::log_gamma_ratio(j + b, th));
        INFO("p = " << p << ", beta = " << b << ", n = " << j);
        CHECK(double(s) == Catch::Approx(big * gr * m - b / th * (h + 1.0)).epsilon(1e-9).margin(1e-9));
      }
    }
  }
}

TEST_CASE("modified process with the full index set follows the plain walk") {
  for (double b : {-0.5, 0.0, 0.7}) {
    const ModelParams params(0.65, b);
    const auto plain = simulate(params, 20000, 31, CheckpointGrid::geometric(20000));
    const auto mod = simulate_modified(params, IndexSet::all(), 20000, 31, CheckpointGrid::geometric(20000));
    CHECK(mod.t() == plain.s());
    CHECK(mod.xi() == plain.sigma());
    for (std::uint64_t k = 1; k <= 20000; ++k) REQUIRE(mod.y(k) == plain.x(k));
  }
}

TEST_CASE("modified process keeps Y off the complement") {
  std::vector<std::uint64_t> excluded;
  for (std::uint64_t k = 2; k * k <= 40000; ++k) excluded.push_back(k * k);
  const auto no_squares = IndexSet::complement_of(excluded);
  const auto odd = IndexSet::arithmetic(3, 2);
  for (const IndexSet* set : {&no_squares, &odd}) {
    const auto t = simulate_modified(ModelParams(0.8, 0.2), *set, 40000, 5, CheckpointGrid::geometric(40000));
    for (std::uint64_t k = 1; k <= t.n(); ++k) {
      if (!set->contains(k) || k < t.s1()) REQUIRE_FALSE(t.y(k));
    }
    std::uint64_t prev = 0;
    for (const auto& cp : t.checkpoints()) {
      CHECK(cp.t >= prev);
      prev = cp.t;
    }
    long double xi = 0.0L;
    std::uint64_t count = 0;
    for (std::uint64_t k = 1; k <= t.n(); ++k) {
      if (t.y(k)) {
        xi += mu(t.params(), k);
        ++count;
      }
    }
    CHECK(count == t.t());
    CHECK(rel_err(t.xi(), static_cast<double>(xi)) < 1e-9);
  }
}

TEST_CASE("modified process with no eligible targets stays at one") {
  const auto set = IndexSet::from_members({5}, 1000);
  const auto t = simulate_modified(ModelParams(0.9, 0.5), set, 1000, 2);
  CHECK(t.s1() == 5);
  CHECK(t.t() == 1);
  CHECK(t.xi() == Catch::Approx(mu(t.params(), 5)).epsilon(1e-14));
  for (std::uint64_t k = 1; k <= 4; ++k) CHECK_FALSE(t.y(k));
  CHECK(t.y(5));
}

TEST_CASE("modified process on even indices, every copy aimed at site 2") {
  // β = 0, every coin succeeds, every draw lands on index 2: Y_k = 1 for
  // even k and 0 for odd k.
  ModifiedTrajectory t(ModelParams(0.5, 0.0), IndexSet::arithmetic(2, 2));
  CHECK(t.s1() == 2);
  CHECK_FALSE(t.y(1));
  CHECK(t.y(2));
  while (t.n() < 12) {
    const double n = static_cast<double>(t.n());
    t.step(0.0, 1.5 / n);
  }
  for (std::uint64_t k = 1; k <= 12; ++k) CHECK(t.y(k) == (k % 2 == 0));
  CHECK(t.t() == 6);
  CHECK(t.xi() == 6.0);
}

TEST_CASE("ensemble mean of M_n is one", "[slow]") {
  const ModelParams params(0.5, 0.0);
  constexpr int kReplicas = 10000;
  double sum = 0.0, sum_sq = 0.0;
  for (int r = 0; r < kReplicas; ++r) {
    const auto t = simulate(params, 100000, 2024, {}, false, r);
    const double m = t.martingale();
    sum += m;
    sum_sq += m * m;
  }
  const double mean = sum / kReplicas;
  const double sd = std::sqrt((sum_sq - kReplicas * mean * mean) / (kReplicas - 1));
  CHECK(std::fabs(mean - 1.0) <= 3.0 * sd / 100.0);
}
