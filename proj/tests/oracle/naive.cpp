#include "naive.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace cfkm::naive {

std::vector<Record> records_of(const CensoredSample& sample) {
  std::vector<Record> out(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto obs = sample.observation(i);
    out[sample.original_index(i)] = {obs.y, obs.delta, obs.x};
  }
  return out;
}

Rows rows_of(const CovariateRows& rows) {
  Rows out;
  for (std::size_t i = 0; i < rows.size(); ++i) out.emplace_back(rows.row(i).begin(), rows.row(i).end());
  return out;
}

double quartic(double u) {
  if (std::fabs(u) >= 1.0) return 0.0;
  return 15.0 / 32.0 * (3.0 - 10.0 * u * u + 7.0 * u * u * u * u);
}

double epanechnikov(double u) {
  if (std::fabs(u) >= 1.0) return 0.0;
  return 0.75 * (1.0 - u * u);
}

double kernel(KernelProfile profile, const std::vector<double>& a, const std::vector<double>& b, double h) {
  double k = 1.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    const double u = (a[l] - b[l]) / h;
    k *= profile == KernelProfile::quartic4 ? quartic(u) : epanechnikov(u);
  }
  return k;
}

std::vector<double> weights(const std::vector<Record>& data, const std::vector<double>& x, double h,
                            KernelProfile profile) {
  std::vector<double> w;
  double total = 0.0;
  for (const auto& r : data) {
    w.push_back(kernel(profile, x, r.x, h));
    total += w.back();
  }
  for (double& v : w) v /= total;
  return w;
}

double density(const Rows& rows, const std::vector<double>& x, double h, KernelProfile profile) {
  double total = 0.0;
  for (const auto& r : rows) total += kernel(profile, x, r, h);
  return total / (static_cast<double>(rows.size()) * std::pow(h, static_cast<double>(x.size())));
}

double kaplan_meier(const std::vector<Record>& data, double t) {
  std::set<double> times;
  for (const auto& r : data)
    if (r.delta == 1 && r.y <= t) times.insert(r.y);
  double survival = 1.0;
  for (double s : times) {
    double d = 0.0;
    double at_risk = 0.0;
    for (const auto& r : data) {
      if (r.y >= s) at_risk += 1.0;
      if (r.y == s && r.delta == 1) d += 1.0;
    }
    survival *= 1.0 - d / at_risk;
  }
  return 1.0 - survival;
}

double ecdf(const std::vector<Record>& data, const std::vector<double>& w, double t, bool uncensored_only,
            bool strict) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const bool in = strict ? data[i].y < t : data[i].y <= t;
    if (in && (!uncensored_only || data[i].delta == 1)) total += w[i];
  }
  return total;
}

double beran(const std::vector<Record>& data, const std::vector<double>& w, double t, ConditionalVariant variant) {
  double exponent = 0.0;
  double product = 1.0;
  for (std::size_t j = 0; j < data.size(); ++j) {
    if (data[j].delta != 1 || data[j].y > t) continue;
    double risk = 0.0;
    for (std::size_t l = 0; l < data.size(); ++l)
      if (data[l].y >= data[j].y) risk += w[l];
    if (std::fabs(risk) < 1e-12) continue;
    exponent += w[j] / risk;
    product *= 1.0 - w[j] / risk;
  }
  return variant == ConditionalVariant::exponential ? 1.0 - std::exp(-exponent) : 1.0 - product;
}

double counterfactual(const std::vector<Record>& data, const Rows& xstar, double h, KernelProfile profile, double t,
                      ConditionalVariant variant) {
  double total = 0.0;
  for (const auto& x : xstar) total += beran(data, weights(data, x, h, profile), t, variant);
  return total / static_cast<double>(xstar.size());
}

double rothe(const std::vector<Record>& data, const Rows& xstar, double h, KernelProfile profile, double t) {
  double total = 0.0;
  for (const auto& x : xstar) total += ecdf(data, weights(data, x, h, profile), t, false);
  return total / static_cast<double>(xstar.size());
}

double inner_integral(const std::vector<Record>& data, const std::vector<double>& w, double u) {
  double total = 0.0;
  for (std::size_t j = 0; j < data.size(); ++j) {
    if (data[j].delta != 1 || data[j].y > u) continue;
    const double at_risk = 1.0 - ecdf(data, w, data[j].y, false, true);
    total += w[j] / (at_risk * at_risk);
  }
  return total;
}

double xi(const std::vector<Record>& data, const std::vector<double>& w, double f_t, double y, int delta, double t) {
  double indicator = 0.0;
  if (delta == 1 && y <= t) indicator = 1.0 / (1.0 - ecdf(data, w, y, false, true));
  return (1.0 - f_t) * (indicator - inner_integral(data, w, std::min(y, t)));
}

double influence_km(const std::vector<Record>& data, double y, int delta, double t) {
  const std::vector<double> w(data.size(), 1.0 / static_cast<double>(data.size()));
  return xi(data, w, kaplan_meier(data, t), y, delta, t);
}

namespace {

Matrix zeros(std::size_t g) { return Matrix(g, std::vector<double>(g, 0.0)); }

double density_ratio(const std::vector<Record>& data, const Rows& xstar, const std::vector<double>& x, double h,
                     KernelProfile profile) {
  Rows sample_rows;
  for (const auto& r : data) sample_rows.push_back(r.x);
  return density(xstar, x, h, profile) / density(sample_rows, x, h, profile);
}

}  // namespace

Matrix sigma11(const std::vector<Record>& data, const Rows& xstar, double h, KernelProfile profile,
               const std::vector<double>& grid, ConditionalVariant variant) {
  const std::size_t g = grid.size();
  Matrix out = zeros(g);
  for (std::size_t a = 0; a < g; ++a) {
    for (std::size_t b = 0; b < g; ++b) {
      const double u = grid[a];
      const double v = grid[b];
      const double fu = counterfactual(data, xstar, h, profile, u, variant);
      const double fv = counterfactual(data, xstar, h, profile, v, variant);
      double first = 0.0;
      for (const auto& xs : xstar) {
        const auto w = weights(data, xs, h, profile);
        first += (beran(data, w, u, variant) - fu) * (beran(data, w, v, variant) - fv);
      }
      double second = 0.0;
      for (const auto& r : data) {
        const auto w = weights(data, r.x, h, profile);
        const double ratio = density_ratio(data, xstar, r.x, h, profile);
        second += ratio * ratio * (1.0 - beran(data, w, u, variant)) * (1.0 - beran(data, w, v, variant)) *
                  inner_integral(data, w, std::min(u, v));
      }
      out[a][b] = first / static_cast<double>(xstar.size()) + second / static_cast<double>(data.size());
    }
  }
  return out;
}

Matrix sigma22(const std::vector<Record>& data, const std::vector<double>& grid) {
  const std::size_t g = grid.size();
  const std::vector<double> w(data.size(), 1.0 / static_cast<double>(data.size()));
  Matrix out = zeros(g);
  for (std::size_t a = 0; a < g; ++a)
    for (std::size_t b = 0; b < g; ++b)
      out[a][b] = (1.0 - kaplan_meier(data, grid[a])) * (1.0 - kaplan_meier(data, grid[b])) *
                  inner_integral(data, w, std::min(grid[a], grid[b]));
  return out;
}

Matrix sigma12(const std::vector<Record>& data, const Rows& xstar, double h, KernelProfile profile,
               const std::vector<double>& grid, ConditionalVariant variant, bool pairing) {
  const std::size_t g = grid.size();
  Matrix out = zeros(g);
  for (std::size_t a = 0; a < g; ++a) {
    const double u = grid[a];
    const double f_star = counterfactual(data, xstar, h, profile, u, variant);
    for (std::size_t b = 0; b < g; ++b) {
      const double v = grid[b];
      double total = 0.0;
      for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& r = data[i];
        const auto w = weights(data, r.x, h, profile);
        double left = xi(data, w, beran(data, w, u, variant), r.y, r.delta, u) *
                      density_ratio(data, xstar, r.x, h, profile);
        if (pairing) left += beran(data, weights(data, xstar[i], h, profile), u, variant) - f_star;
        total += left * influence_km(data, r.y, r.delta, v);
      }
      out[a][b] = total / static_cast<double>(data.size());
    }
  }
  return out;
}

}  // namespace cfkm::naive
