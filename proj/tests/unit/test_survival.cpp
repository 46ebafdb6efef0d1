#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cfkm/survival.hpp"
#include "golden.hpp"
#include "naive.hpp"

using namespace cfkm;

namespace {

CensoredSample make(std::vector<double> ys, std::vector<int> ds, std::vector<double> xs = {}) {
  std::vector<Observation> o;
  for (std::size_t i = 0; i < ys.size(); ++i) o.push_back({ys[i], ds[i], {xs.empty() ? 0.5 : xs[i]}});
  return validate_sample(std::move(o));
}

// Durations on a coarse lattice so ties are common.
CensoredSample random_sample(std::mt19937_64& rng, std::size_t n, std::size_t d, double censor_p) {
  std::uniform_int_distribution<int> tick(1, 12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Observation> o;
  for (std::size_t i = 0; i < n; ++i) {
    Observation ob{0.5 * tick(rng), u(rng) < censor_p ? 0 : 1, {}};
    for (std::size_t k = 0; k < d; ++k) ob.x.push_back(u(rng));
    o.push_back(ob);
  }
  return validate_sample(std::move(o));
}

std::vector<double> probe_times(const CensoredSample& s) {
  std::vector<double> t{0.0, s.y(0) - 0.1};
  for (double y : s.ys()) {
    t.push_back(y);
    t.push_back(y + 0.01);
  }
  return t;
}

}  // namespace

TEST_CASE("Kaplan-Meier hand cases") {
  const auto full = kaplan_meier(make({1, 2, 3}, {1, 1, 1}));
  CHECK(full(2.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(full(0.5) == 0.0);

  const auto cens = kaplan_meier(make({1, 2, 3}, {1, 0, 1}));
  CHECK(cens(1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(cens(2.5) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(cens(3.0) == 1.0);
  CHECK(cens(0.99) == 0.0);

  const auto none = kaplan_meier(make({1, 2}, {0, 0}));
  CHECK(none(5.0) == 0.0);
}

TEST_CASE("Kaplan-Meier agrees with the tie-aware textbook product") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const auto s = random_sample(rng, 3 + rep % 18, 1, 0.35);
    const auto data = naive::records_of(s);
    const auto km = kaplan_meier(s);
    for (double t : probe_times(s)) CHECK(std::fabs(km(t) - naive::kaplan_meier(data, t)) < 1e-12);
  }
  for (const auto& c : golden::cases()) {
    const auto data = naive::records_of(c.sample);
    const auto km = kaplan_meier(c.sample);
    for (double t : c.grid.points()) CHECK(std::fabs(km(t) - naive::kaplan_meier(data, t)) < 1e-12);
  }
}

TEST_CASE("Kaplan-Meier without censoring is the ECDF") {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 30; ++rep) {
    const auto s = random_sample(rng, 5 + rep, 1, 0.0);
    const auto km = kaplan_meier(s);
    for (double t : probe_times(s)) {
      const double share =
          static_cast<double>(std::count_if(s.ys().begin(), s.ys().end(), [&](double y) { return y <= t; })) /
          static_cast<double>(s.size());
      CHECK(std::fabs(km(t) - share) < 1e-14);
    }
  }
}

TEST_CASE("Kaplan-Meier ignores input order") {
  std::mt19937_64 rng(13);
  const auto s = random_sample(rng, 25, 1, 0.3);
  std::vector<Observation> shuffled;
  for (std::size_t i = 0; i < s.size(); ++i) shuffled.push_back(s.observation(i));
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto a = kaplan_meier(s);
  const auto b = kaplan_meier(validate_sample(shuffled));
  CHECK(a.knots() == b.knots());
  CHECK(a.values() == b.values());
}

TEST_CASE("conditional estimator hand cases") {
  const auto spec = KernelSpec::quartic4(1);
  const auto one = make({2.0}, {1}, {0.4});
  const auto c1 = beran_conditional(one, {{0.4}, 1.0, spec, ConditionalVariant::exponential}).curve;
  CHECK(c1(1.9) == 0.0);
  CHECK(c1(2.0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));

  const auto two = make({1, 2}, {1, 1}, {0.3, 0.3});
  const auto c2 = beran_conditional(two, {{0.3}, 1.0, spec, ConditionalVariant::exponential}).curve;
  CHECK(c2(2.0) == doctest::Approx(1.0 - std::exp(-1.5)).epsilon(1e-15));
  CHECK(c2(2.0) == doctest::Approx(0.77687).epsilon(1e-5));

  const auto none = make({1, 2, 3}, {0, 0, 0}, {0.1, 0.2, 0.3});
  const auto c3 = beran_conditional(none, {{0.2}, 1.0, spec, ConditionalVariant::exponential}).curve;
  CHECK(c3.size() == 0);
  CHECK(c3(10.0) == 0.0);
}

TEST_CASE("conditional estimator agrees with the naive loop") {
  for (const auto& c : golden::cases()) {
    const auto data = naive::records_of(c.sample);
    for (auto variant : {ConditionalVariant::exponential, ConditionalVariant::product_limit}) {
      for (std::size_t r = 0; r < c.xstar.size(); ++r) {
        const std::vector<double> x(c.xstar.row(r).begin(), c.xstar.row(r).end());
        const auto curve =
            beran_conditional(c.sample, {x, c.h, KernelSpec::quartic4(c.sample.dim()), variant}).curve;
        const auto w = naive::weights(data, x, c.h, KernelProfile::quartic4);
        for (double t : c.grid.points()) CHECK(std::fabs(curve(t) - naive::beran(data, w, t, variant)) < 1e-12);
      }
    }
  }
}

TEST_CASE("uniform weights reduce to the pooled exponential Nelson-Aalen curve") {
  std::mt19937_64 rng(14);
  for (int rep = 0; rep < 40; ++rep) {
    auto s = random_sample(rng, 2 + rep % 15, 1, 0.3);
    std::vector<Observation> same;
    for (std::size_t i = 0; i < s.size(); ++i) same.push_back({s.y(i), s.delta(i), {0.25}});
    s = validate_sample(same);
    const double h = 0.1 + rep * 0.3;
    const auto curve = beran_conditional(s, {{0.25}, h, KernelSpec::quartic4(1), ConditionalVariant::exponential}).curve;
    const auto data = naive::records_of(s);
    for (double t : probe_times(s)) {
      double exponent = 0.0;
      for (const auto& rj : data) {
        if (rj.delta != 1 || rj.y > t) continue;
        double at_risk = 0.0;
        for (const auto& rl : data) at_risk += rl.y >= rj.y ? 1.0 : 0.0;
        exponent += 1.0 / at_risk;
      }
      CHECK(std::fabs(curve(t) - (1.0 - std::exp(-exponent))) < 1e-12);
    }
  }
}

TEST_CASE("variants differ by at most the sum of squared terms") {
  std::mt19937_64 rng(15);
  for (int rep = 0; rep < 30; ++rep) {
    const auto s = random_sample(rng, 8 + rep, 2, 0.25);
    const std::vector<double> x{0.5, 0.5};
    const auto spec = KernelSpec::quartic4(2);
    const auto e = beran_conditional(s, {x, 2.0, spec, ConditionalVariant::exponential}).curve;
    const auto p = beran_conditional(s, {x, 2.0, spec, ConditionalVariant::product_limit}).curve;
    const auto data = naive::records_of(s);
    const auto w = naive::weights(data, x, 2.0, KernelProfile::quartic4);
    double bound = 0.0;
    for (const auto& rj : data) {
      if (rj.delta != 1) continue;
      double risk = 0.0;
      for (std::size_t l = 0; l < data.size(); ++l) risk += data[l].y >= rj.y ? w[l] : 0.0;
      const auto idx = static_cast<std::size_t>(&rj - data.data());
      bound += (w[idx] / risk) * (w[idx] / risk);
    }
    for (double t : probe_times(s)) CHECK(std::fabs(e(t) - p(t)) <= bound + 1e-15);
  }
}

TEST_CASE("a nonnegative kernel gives monotone curves in [0, 1]") {
  std::mt19937_64 rng(16);
  for (int rep = 0; rep < 30; ++rep) {
    const auto s = random_sample(rng, 10 + rep, 2, 0.3);
    for (auto variant : {ConditionalVariant::exponential, ConditionalVariant::product_limit}) {
      const auto c = beran_conditional(s, {{0.4, 0.6}, 0.8, KernelSpec::epanechnikov(2), variant});
      double prev = 0.0;
      for (double v : c.curve.values()) {
        CHECK(v >= prev);
        CHECK(v <= 1.0);
        prev = v;
      }
    }
  }
}

TEST_CASE("degenerate risk sets are skipped and counted") {
  // The last record lies outside the window, so its risk set carries no weight.
  const auto s = make({1, 2, 3}, {1, 1, 1}, {0.0, 0.1, 5.0});
  const auto c = beran_conditional(s, {{0.05}, 1.0, KernelSpec::epanechnikov(1), ConditionalVariant::exponential});
  CHECK(c.degenerate_terms == 1);
  CHECK(c.curve(3.0) == c.curve(2.0));
  CHECK(std::isfinite(c.curve(3.0)));
}

TEST_CASE("conditional empirical CDFs") {
  const auto s = make({1, 2, 2, 4}, {1, 0, 1, 1}, {0.1, 0.2, 0.3, 0.4});
  // Identical covariates give uniform weights: pooled ECDF.
  const auto same = make({1, 2, 2, 4}, {1, 1, 1, 1}, {0.3, 0.3, 0.3, 0.3});
  const auto pooled = conditional_ecdf(same, std::vector<double>{0.3}, 1.0, KernelSpec::quartic4(1), false);
  CHECK(pooled(1.0) == 0.25);
  CHECK(pooled(2.0) == 0.75);
  CHECK(pooled(4.0) == 1.0);

  const auto cens = make({1, 2}, {0, 0}, {0.1, 0.2});
  CHECK(conditional_ecdf(cens, std::vector<double>{0.1}, 1.0, KernelSpec::quartic4(1), true)(9.0) == 0.0);

  const auto data = naive::records_of(s);
  const auto w = naive::weights(data, {0.22}, 0.9, KernelProfile::quartic4);
  for (bool sub : {false, true}) {
    const auto c = conditional_ecdf(s, std::vector<double>{0.22}, 0.9, KernelSpec::quartic4(1), sub);
    for (double t : {0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0}) CHECK(std::fabs(c(t) - naive::ecdf(data, w, t, sub)) < 1e-12);
  }
}

TEST_CASE("tie groups") {
  const auto s = make({1, 2, 2, 2, 3}, {0, 1, 0, 1, 0});
  const TieGroups g(s);
  CHECK(g.size() == 3);
  CHECK(g.events(1) == 2);
  CHECK(g.begin(1) == 1);
  CHECK(g.end(1) == 4);
  CHECK(g.event_times() == std::vector<double>{2.0});
}
