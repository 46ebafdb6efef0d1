#include <doctest.h>

#include <cmath>

#include "cfkm/counterfactual.hpp"
#include "cfkm/error.hpp"
#include "cfkm/inference.hpp"
#include "cfkm/simulation.hpp"
#include "golden.hpp"
#include "naive.hpp"

using namespace cfkm;

namespace {

const Grid kStudyGrid = Grid::uniform(4.25, 8.15, 0.05);

CensoredSample uncensored_draw(std::size_t n, std::uint64_t seed) {
  const DgpDraw d = generate_draw(n, seed);
  std::vector<Observation> obs;
  for (const auto& u : d.latent) obs.push_back({u.t, 1, {u.x1, u.x2}});
  return validate_sample(std::move(obs));
}

}  // namespace

TEST_CASE("one counterfactual row reproduces the conditional curve") {
  const auto c = golden::load("mixed_d2");
  const auto spec = KernelSpec::quartic4(2);
  const std::vector<double> x{0.4, 0.55};
  const CounterfactualCovariates one(CovariateRows(2, x), 2, std::nullopt);
  const auto avg = counterfactual_cdf(c.sample, one, c.h, spec, c.grid);
  const auto direct = beran_conditional(c.sample, {x, c.h, spec, ConditionalVariant::exponential}).curve.evaluate(c.grid);
  CHECK(avg.values == direct);

  const std::vector<double> x2{0.8, 0.2};
  const CounterfactualCovariates two(CovariateRows(2, {0.4, 0.55, 0.8, 0.2}), 2, std::nullopt);
  const auto c2 = beran_conditional(c.sample, {x2, c.h, spec, ConditionalVariant::exponential}).curve.evaluate(c.grid);
  const auto both = counterfactual_cdf(c.sample, two, c.h, spec, c.grid);
  for (std::size_t k = 0; k < c.grid.size(); ++k)
    CHECK(std::fabs(both.values[k] - 0.5 * (direct[k] + c2[k])) < 1e-15);

  const auto single_rothe = rothe_cdf(c.sample, one, c.h, spec, c.grid);
  const auto ecdf = conditional_ecdf(c.sample, x, c.h, spec, false).evaluate(c.grid);
  for (std::size_t k = 0; k < c.grid.size(); ++k) CHECK(std::fabs(single_rothe.values[k] - ecdf[k]) < 1e-15);
}

TEST_CASE("counterfactual and comparator agree with the naive loops") {
  for (const auto& c : golden::cases()) {
    const auto data = naive::records_of(c.sample);
    const auto rows = naive::rows_of(c.xstar.rows());
    const auto spec = KernelSpec::quartic4(c.sample.dim());
    for (auto variant : {ConditionalVariant::exponential, ConditionalVariant::product_limit}) {
      CounterfactualOptions opts;
      opts.variant = variant;
      const auto cf = counterfactual_cdf(c.sample, c.xstar, c.h, spec, c.grid, opts);
      for (std::size_t k = 0; k < c.grid.size(); ++k)
        CHECK(std::fabs(cf.values[k] - naive::counterfactual(data, rows, c.h, KernelProfile::quartic4, c.grid[k], variant)) <
              1e-10);
    }
    const auto rc = rothe_cdf(c.sample, c.xstar, c.h, spec, c.grid);
    for (std::size_t k = 0; k < c.grid.size(); ++k)
      CHECK(std::fabs(rc.values[k] - naive::rothe(data, rows, c.h, KernelProfile::quartic4, c.grid[k])) < 1e-10);
  }
}

TEST_CASE("without censoring the comparator matches the product-limit construction") {
  const auto s = uncensored_draw(60, 5);
  const DgpDraw d = generate_draw(60, 5);
  const auto spec = KernelSpec::quartic4(2);
  const double h = 2.0;
  CounterfactualOptions pl;
  pl.variant = ConditionalVariant::product_limit;
  const auto rc = rothe_cdf(s, d.xstar, h, spec, kStudyGrid);
  const auto cf_pl = counterfactual_cdf(s, d.xstar, h, spec, kStudyGrid, pl);
  const auto cf_exp = counterfactual_cdf(s, d.xstar, h, spec, kStudyGrid);
  for (std::size_t k = 0; k < kStudyGrid.size(); ++k) CHECK(std::fabs(rc.values[k] - cf_pl.values[k]) < 1e-12);

  // Exponential form: per-row gap at most sum_j a_j^2, so the mean gap is at most the mean bound.
  const auto data = naive::records_of(s);
  double bound = 0.0;
  for (std::size_t r = 0; r < d.xstar.size(); ++r) {
    const std::vector<double> x(d.xstar.row(r).begin(), d.xstar.row(r).end());
    const auto w = naive::weights(data, x, h, KernelProfile::quartic4);
    for (std::size_t j = 0; j < data.size(); ++j) {
      double risk = 0.0;
      for (std::size_t l = 0; l < data.size(); ++l) risk += data[l].y >= data[j].y ? w[l] : 0.0;
      bound += (w[j] / risk) * (w[j] / risk);
    }
  }
  bound /= static_cast<double>(d.xstar.size());
  double gap = 0.0;
  for (std::size_t k = 0; k < kStudyGrid.size(); ++k) gap = std::max(gap, std::fabs(cf_exp.values[k] - rc.values[k]));
  CHECK(gap <= bound);
  CHECK(gap > 0.0);
}

TEST_CASE("oracle estimator") {
  const auto full = validate_sample({{1, 1, {0.1}}, {2, 1, {0.2}}, {3, 1, {0.3}}});
  CHECK(oracle_cdf(full)(2.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  const auto cens = validate_sample({{1, 1, {0.1}}, {2, 0, {0.2}}, {3, 1, {0.3}}});
  const auto o = oracle_cdf(cens);
  CHECK(o(1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(o(2.5) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(o(3.0) == 1.0);
}

TEST_CASE("hazard transforms") {
  const Grid g({1.0, 2.0, 3.0});
  const std::vector<double> zero(3, 0.0);
  CHECK(cumulative_hazard(g, zero, HazardMethod::neg_log) == zero);

  const std::vector<double> third(3, 1.0 / 3.0);
  CHECK(cumulative_hazard(g, third, HazardMethod::neg_log)[0] == doctest::Approx(0.405465).epsilon(1e-6));

  const StepCurve jump({0.5}, {1.0 / 3.0}, 0.0);
  CHECK(cumulative_hazard(g, third, HazardMethod::na_integral, &jump)[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const std::vector<double> reaches{0.5, 1.0, 1.0};
  try {
    cumulative_hazard(g, reaches, HazardMethod::neg_log);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::hazard_divergence);
  }
  const auto cut = cumulative_hazard(g, reaches, HazardMethod::neg_log, nullptr, OnDivergence::truncate);
  CHECK(cut[0] == doctest::Approx(std::log(2.0)));
  CHECK(std::isnan(cut[1]));
  CHECK(std::isnan(cut[2]));
  CHECK_THROWS_AS(cumulative_hazard(g, third, HazardMethod::na_integral), Error);
  CHECK_THROWS_AS(cumulative_hazard(g, std::vector<double>{0.1}, HazardMethod::neg_log), Error);
}

TEST_CASE("hazard forms differ by at most the second-order term") {
  const DgpDraw d = generate_draw(400, 21);
  const auto km = kaplan_meier(d.sample);
  const Grid g = *kStudyGrid.truncated(7.5);
  const auto f = km.evaluate(g);
  const auto nl = cumulative_hazard(g, f, HazardMethod::neg_log);
  const auto na = cumulative_hazard(g, f, HazardMethod::na_integral, &km);
  double bound = 0.0;
  double prev = 0.0;
  std::size_t k = 0;
  for (std::size_t gi = 0; gi < g.size(); ++gi) {
    while (k < km.size() && km.knots()[k] <= g[gi]) {
      const double q = (km.values()[k] - prev) / (1.0 - prev);
      bound += q * q;
      prev = km.values()[k++];
    }
    CHECK(na[gi] <= nl[gi] + 1e-15);
    CHECK(nl[gi] - na[gi] <= bound + 1e-15);
  }
}

TEST_CASE("policy effects are exact differences") {
  const auto c = golden::load("mixed_d2");
  for (auto method : {HazardMethod::neg_log, HazardMethod::na_integral}) {
    const auto pe = policy_effects(c.sample, c.xstar, c.h, KernelSpec::quartic4(2), c.grid, method);
    REQUIRE(pe.f_star.size() == c.grid.size());
    for (std::size_t k = 0; k < c.grid.size(); ++k) {
      CHECK(pe.delta_f[k] == pe.f_star[k] - pe.f_base[k]);
      const double d = pe.lambda_star[k] - pe.lambda_base[k];
      CHECK(((std::isnan(d) && std::isnan(pe.delta_lambda[k])) || d == pe.delta_lambda[k]));
    }
  }
  CHECK_THROWS_AS(Grid(std::vector<double>{}), Error);
}

TEST_CASE("isotonize") {
  const auto v = isotonize(std::vector<double>{-0.1, 0.3, 0.2, 0.5, 1.2});
  CHECK(v == std::vector<double>{0.0, 0.3, 0.3, 0.5, 1.0});
}

TEST_CASE("empty neighborhoods") {
  const auto s = validate_sample({{1, 1, {0.1}}, {2, 1, {0.2}}, {3, 0, {0.3}}});
  const CounterfactualCovariates xs(CovariateRows(1, {0.2, 9.0, 0.15}), 1, std::nullopt);
  const auto spec = KernelSpec::epanechnikov(1);
  try {
    counterfactual_curve(s, xs, 0.5, spec);
    FAIL("expected an empty neighborhood");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::empty_neighborhood);
    REQUIRE(e.row());
    CHECK(*e.row() == 1);
  }
  CounterfactualOptions drop;
  drop.neighborhood = NeighborhoodPolicy::drop;
  const auto avg = counterfactual_curve(s, xs, 0.5, spec, drop);
  CHECK(avg.dropped_rows == std::vector<std::size_t>{1});
  const CounterfactualCovariates kept(CovariateRows(1, {0.2, 0.15}), 1, std::nullopt);
  const auto ref = counterfactual_curve(s, kept, 0.5, spec);
  CHECK(avg.curve.values() == ref.curve.values());
}

TEST_CASE("thread count does not change results") {
  const DgpDraw d = generate_draw(300, 77);
  const auto spec = KernelSpec::quartic4(2);
  CounterfactualOptions one, many;
  many.threads = 4;
  const auto a = counterfactual_curve(d.sample, d.xstar, 1.3, spec, one);
  const auto b = counterfactual_curve(d.sample, d.xstar, 1.3, spec, many);
  CHECK(a.curve.knots() == b.curve.knots());
  CHECK(a.curve.values() == b.curve.values());
}

TEST_CASE("simulation design: estimates track the quadrature truth") {
  const TruthCurves truth = truth_curves(kStudyGrid);
  {
    const DgpDraw d = generate_draw(800, 1001);
    const auto cf = counterfactual_cdf(d.sample, d.xstar, default_bandwidth(800), KernelSpec::quartic4(2), kStudyGrid);
    double sup = 0.0;
    for (std::size_t k = 0; k < kStudyGrid.size(); ++k) sup = std::max(sup, std::fabs(cf.values[k] - truth.f_star[k]));
    CHECK(sup < 0.05);
  }
  {
    const DgpDraw d = generate_draw(400, 1002);
    const Grid g = *kStudyGrid.truncated(7.0);
    const auto pe = policy_effects(d.sample, d.xstar, default_bandwidth(400), KernelSpec::quartic4(2), g,
                                   HazardMethod::neg_log);
    double sup = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k)
      sup = std::max(sup, std::fabs(pe.delta_lambda[k] - (truth.lambda_star[k] - truth.lambda_t[k])));
    CHECK(sup < 0.1);
  }
}

TEST_CASE("self-counterfactual with a huge bandwidth has no effect") {
  const DgpDraw d = generate_draw(400, 1003);
  const CounterfactualCovariates same(d.sample.covariates(), 2, d.sample.size());
  const Grid g = *kStudyGrid.truncated(uncensored_quantile(d.sample, 0.95));
  const auto pe = policy_effects(d.sample, same, 1e4, KernelSpec::quartic4(2), g, HazardMethod::neg_log);
  const auto var = sigma22_hat(make_km_influence(d.sample), g).diagonal();
  for (std::size_t k = 0; k < g.size(); ++k)
    CHECK(std::fabs(pe.delta_f[k]) <= 3.0 * std::sqrt(var[k] / static_cast<double>(d.sample.size())));
}
