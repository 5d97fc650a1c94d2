#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace lagopf {

/// f(z, grad) -> value; grad is resized and filled by the callee.
using Objective = std::function<double(std::span<const double>, std::vector<double>&)>;

struct BoxMinimizerOptions {
  int max_iter = 500;
  double tol_grad = 1e-8;
  int memory = 10;
};

struct BoxMinimizerResult {
  std::vector<double> z;
  double value = 0.0;
  double proj_grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline double projected_gradient_norm(std::span<const double> z, std::span<const double> g,
                                      std::span<const double> lo, std::span<const double> hi) {
  double m = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    double pg = g[i];
    if (z[i] <= lo[i] && pg > 0.0) pg = 0.0;
    if (z[i] >= hi[i] && pg < 0.0) pg = 0.0;
    m = std::max(m, std::abs(pg));
  }
  return m;
}

/// Projected L-BFGS for min f(z) s.t. lo <= z <= hi. Variables pinned at a bound with the gradient
/// pointing outward are frozen for the step; the quasi-Newton direction acts on the rest, and an
/// Armijo backtracking search runs along the projected path.
inline BoxMinimizerResult minimize_box(const Objective& f, std::vector<double> z, std::span<const double> lo,
                                       std::span<const double> hi, const BoxMinimizerOptions& opt) {
  const std::size_t dim = z.size();
  auto project = [&](std::vector<double>& v) {
    for (std::size_t i = 0; i < dim; ++i) v[i] = std::clamp(v[i], lo[i], hi[i]);
  };
  project(z);

  BoxMinimizerResult res;
  std::vector<double> g;
  double fz = f(z, g);
  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;

  std::vector<double> d(dim), z_new(dim), g_new;
  std::vector<char> frozen(dim);
  for (int it = 0; it < opt.max_iter; ++it) {
    res.proj_grad_norm = projected_gradient_norm(z, g, lo, hi);
    if (!std::isfinite(fz) || res.proj_grad_norm <= opt.tol_grad) break;
    res.iterations = it + 1;

    for (std::size_t i = 0; i < dim; ++i)
      frozen[i] = (lo[i] == hi[i]) || (z[i] <= lo[i] && g[i] > 0.0) || (z[i] >= hi[i] && g[i] < 0.0);

    // two-loop recursion on the free coordinates
    for (std::size_t i = 0; i < dim; ++i) d[i] = frozen[i] ? 0.0 : -g[i];
    const std::size_t m = s_hist.size();
    std::vector<double> alpha(m);
    for (std::size_t k = m; k-- > 0;) {
      double a = 0.0;
      for (std::size_t i = 0; i < dim; ++i)
        if (!frozen[i]) a += s_hist[k][i] * d[i];
      a *= rho_hist[k];
      alpha[k] = a;
      for (std::size_t i = 0; i < dim; ++i)
        if (!frozen[i]) d[i] -= a * y_hist[k][i];
    }
    if (m > 0) {
      double sy = 0.0, yy = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        sy += s_hist.back()[i] * y_hist.back()[i];
        yy += y_hist.back()[i] * y_hist.back()[i];
      }
      const double gamma = yy > 0.0 ? sy / yy : 1.0;
      for (double& di : d) di *= gamma;
    }
    for (std::size_t k = 0; k < m; ++k) {
      double bta = 0.0;
      for (std::size_t i = 0; i < dim; ++i)
        if (!frozen[i]) bta += y_hist[k][i] * d[i];
      bta *= rho_hist[k];
      for (std::size_t i = 0; i < dim; ++i)
        if (!frozen[i]) d[i] += s_hist[k][i] * (alpha[k] - bta);
    }

    double slope = 0.0, dn = 0.0, gn = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      slope += g[i] * d[i];
      dn += d[i] * d[i];
      gn += frozen[i] ? 0.0 : g[i] * g[i];
    }
    if (!(slope < -1e-12 * std::sqrt(dn * gn))) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t i = 0; i < dim; ++i) d[i] = frozen[i] ? 0.0 : -g[i];
    }

    double step = 1.0;
    if (s_hist.empty()) {
      double dmax = 0.0;
      for (double di : d) dmax = std::max(dmax, std::abs(di));
      if (dmax > 0.0) step = std::min(1.0, 1.0 / dmax);
    }
    bool accepted = false;
    double f_new = fz;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < dim; ++i) z_new[i] = z[i] + step * d[i];
      project(z_new);
      double decrease = 0.0;
      for (std::size_t i = 0; i < dim; ++i) decrease += g[i] * (z_new[i] - z[i]);
      // projection can turn a descent direction into an ascent path
      if (!(decrease < 0.0)) break;
      f_new = f(z_new, g_new);
      // roundoff allowance on f
      if (std::isfinite(f_new) && f_new <= fz + 1e-4 * decrease + 4e-16 * std::abs(fz)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (s_hist.empty()) break;  // steepest descent also failed: stalled
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      continue;
    }

    std::vector<double> s(dim), y(dim);
    double sy = 0.0, ss = 0.0, yy = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      s[i] = z_new[i] - z[i];
      y[i] = g_new[i] - g[i];
      sy += s[i] * y[i];
      ss += s[i] * s[i];
      yy += y[i] * y[i];
    }
    if (sy > 1e-12 * std::sqrt(ss * yy)) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    z.swap(z_new);
    g.swap(g_new);
    fz = f_new;
    if (ss == 0.0) break;
  }
  res.proj_grad_norm = projected_gradient_norm(z, g, lo, hi);
  res.converged = std::isfinite(fz) && res.proj_grad_norm <= opt.tol_grad;
  res.z = std::move(z);
  res.value = fz;
  return res;
}

}  // namespace lagopf
