#pragma once

#include <span>

namespace cotdrive::kernels {

/// Which quadratic form the bivariate negative log-density uses.
/// `standard` is the normalized density (cross term 2ρ z_x z_y); `literal`
/// drops the factor 2 and is kept only for fidelity comparisons.
enum class NllForm { standard, literal };

/// Structure-of-arrays view over N bivariate Gaussian evaluations.
struct GaussianBatch {
  std::span<const double> mu_x, mu_y, sigma_x, sigma_y, rho, x, y;
  std::size_t size() const { return mu_x.size(); }
};

/// Per-row partial derivatives of the negative log-density.
struct GaussianGrads {
  std::span<double> mu_x, mu_y, sigma_x, sigma_y, rho;
};

/// Negative log-density of (x, y) under each row's Gaussian; when `grads`
/// is non-null, also fills d nll / d (mu_x, mu_y, sigma_x, sigma_y, rho).
void bivariate_nll(const GaussianBatch& batch, NllForm form, std::span<double> nll,
                   const GaussianGrads* grads);

namespace serial {
void bivariate_nll(const GaussianBatch& batch, NllForm form, std::span<double> nll,
                   const GaussianGrads* grads);
}

}  // namespace cotdrive::kernels
