#pragma once

#include <vector>

namespace fluxfed {

// Diagonal Gaussian: per-coordinate mean and standard deviation (sigma >= 0).
struct GaussianSummary {
    std::vector<double> mean;
    std::vector<double> sigma;
};

// 2-Wasserstein distance between diagonal Gaussians:
//   W2^2 = ||mu_a - mu_b||^2 + sum_i (sigma_a_i - sigma_b_i)^2.
// The sigma term is the commuting-covariance Bures distance.
double w2_gaussian_diag(const GaussianSummary& a, const GaussianSummary& b);

struct BoundConstants {
    double c_minus;  // min{1, 1/(2*sqrt(lambda_max))}
    double c_plus;   // max{1, 1/(2*sqrt(lambda_min))}
};

// Two-sided comparison constants for eigenvalues confined to [lambda_min, lambda_max].
BoundConstants prop_constants(double lambda_min, double lambda_max);

struct BoundCheck {
    double delta_sq;  // ||mu_a-mu_b||^2 + sum_i (var_a_i - var_b_i)^2  (variances!)
    double w2_sq;
    bool holds;       // c_minus^2 * delta_sq <= w2_sq <= c_plus^2 * delta_sq, tol 1e-12
};

// Verifies the sandwich between the plain parameter-space distance (means and
// variances) and the true W2. Every variance must lie in [lambda_min, lambda_max].
BoundCheck check_w2_bound(const GaussianSummary& a, const GaussianSummary& b,
                          double lambda_min, double lambda_max);

}  // namespace fluxfed
