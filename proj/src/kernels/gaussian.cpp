#include "cotdrive/kernels/gaussian.hpp"

#include <cmath>
#include <numbers>

#include "cotdrive/core/error.hpp"

namespace cotdrive::kernels {

namespace {

struct RowEval {
  double nll, d_mu_x, d_mu_y, d_sigma_x, d_sigma_y, d_rho;
};

inline RowEval eval_row(double mx, double my, double sx, double sy, double rho, double x, double y,
                        double cross) {
  const double zx = (x - mx) / sx;
  const double zy = (y - my) / sy;
  const double omega = 1.0 - rho * rho;
  const double quad = zx * zx - cross * rho * zx * zy + zy * zy;
  RowEval r;
  r.nll = std::log(2.0 * std::numbers::pi * sx * sy * std::sqrt(omega)) + quad / (2.0 * omega);
  const double dq_dzx = 2.0 * zx - cross * rho * zy;
  const double dq_dzy = 2.0 * zy - cross * rho * zx;
  const double inv2w = 1.0 / (2.0 * omega);
  r.d_mu_x = -inv2w * dq_dzx / sx;
  r.d_mu_y = -inv2w * dq_dzy / sy;
  r.d_sigma_x = 1.0 / sx - inv2w * dq_dzx * zx / sx;
  r.d_sigma_y = 1.0 / sy - inv2w * dq_dzy * zy / sy;
  r.d_rho = -rho / omega - cross * zx * zy * inv2w + quad * rho / (omega * omega);
  return r;
}

void check(const GaussianBatch& b, std::span<double> nll, const GaussianGrads* g) {
  const std::size_t n = b.size();
  if (b.mu_y.size() != n || b.sigma_x.size() != n || b.sigma_y.size() != n || b.rho.size() != n ||
      b.x.size() != n || b.y.size() != n || nll.size() != n)
    throw ShapeError("bivariate_nll: operand lengths differ");
  if (g && (g->mu_x.size() != n || g->mu_y.size() != n || g->sigma_x.size() != n ||
            g->sigma_y.size() != n || g->rho.size() != n))
    throw ShapeError("bivariate_nll: gradient lengths differ");
}

}  // namespace

void bivariate_nll(const GaussianBatch& b, NllForm form, std::span<double> nll,
                   const GaussianGrads* g) {
  check(b, nll, g);
  const double cross = form == NllForm::standard ? 2.0 : 1.0;
  const long n = static_cast<long>(b.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    const auto r = eval_row(b.mu_x[i], b.mu_y[i], b.sigma_x[i], b.sigma_y[i], b.rho[i], b.x[i],
                            b.y[i], cross);
    nll[i] = r.nll;
    if (g) {
      g->mu_x[i] = r.d_mu_x;
      g->mu_y[i] = r.d_mu_y;
      g->sigma_x[i] = r.d_sigma_x;
      g->sigma_y[i] = r.d_sigma_y;
      g->rho[i] = r.d_rho;
    }
  }
}

namespace serial {

void bivariate_nll(const GaussianBatch& b, NllForm form, std::span<double> nll,
                   const GaussianGrads* g) {
  check(b, nll, g);
  const double cross = form == NllForm::standard ? 2.0 : 1.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto r = eval_row(b.mu_x[i], b.mu_y[i], b.sigma_x[i], b.sigma_y[i], b.rho[i], b.x[i],
                            b.y[i], cross);
    nll[i] = r.nll;
    if (g) {
      g->mu_x[i] = r.d_mu_x;
      g->mu_y[i] = r.d_mu_y;
      g->sigma_x[i] = r.d_sigma_x;
      g->sigma_y[i] = r.d_sigma_y;
      g->rho[i] = r.d_rho;
    }
  }
}

}  // namespace serial

}  // namespace cotdrive::kernels
