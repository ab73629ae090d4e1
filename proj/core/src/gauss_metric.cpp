#include "fluxfed/gauss_metric.hpp"

#include <cmath>

#include "fluxfed/errors.hpp"

namespace fluxfed {

namespace {

void validate(const GaussianSummary& g, const char* name) {
    if (g.mean.size() != g.sigma.size())
        throw ConfigError(std::string(name) + ": mean/sigma length mismatch");
    if (g.mean.empty()) throw ConfigError(std::string(name) + ": empty summary");
    for (double s : g.sigma)
        if (!(s >= 0.0)) throw ConfigError(std::string(name) + ": negative or NaN sigma");
}

}  // namespace

double w2_gaussian_diag(const GaussianSummary& a, const GaussianSummary& b) {
    validate(a, "lhs");
    validate(b, "rhs");
    if (a.mean.size() != b.mean.size()) throw ConfigError("dimension mismatch between summaries");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.mean.size(); ++i) {
        double dm = a.mean[i] - b.mean[i];
        double ds = a.sigma[i] - b.sigma[i];
        acc += dm * dm + ds * ds;
    }
    return std::sqrt(acc);
}

BoundConstants prop_constants(double lambda_min, double lambda_max) {
    if (!(lambda_min > 0.0) || !(lambda_max >= lambda_min))
        throw ConfigError("eigenvalue range must satisfy 0 < lambda_min <= lambda_max");
    double c_minus = std::min(1.0, 1.0 / (2.0 * std::sqrt(lambda_max)));
    double c_plus = std::max(1.0, 1.0 / (2.0 * std::sqrt(lambda_min)));
    return {c_minus, c_plus};
}

BoundCheck check_w2_bound(const GaussianSummary& a, const GaussianSummary& b,
                          double lambda_min, double lambda_max) {
    validate(a, "lhs");
    validate(b, "rhs");
    if (a.mean.size() != b.mean.size()) throw ConfigError("dimension mismatch between summaries");
    BoundConstants c = prop_constants(lambda_min, lambda_max);

    double delta_sq = 0.0;
    for (std::size_t i = 0; i < a.mean.size(); ++i) {
        double va = a.sigma[i] * a.sigma[i];
        double vb = b.sigma[i] * b.sigma[i];
        if (va < lambda_min - 1e-12 || va > lambda_max + 1e-12 || vb < lambda_min - 1e-12 ||
            vb > lambda_max + 1e-12)
            throw ConfigError("variance outside the stated eigenvalue range");
        double dm = a.mean[i] - b.mean[i];
        double dv = va - vb;
        delta_sq += dm * dm + dv * dv;
    }
    double w2 = w2_gaussian_diag(a, b);
    double w2_sq = w2 * w2;
    constexpr double kTol = 1e-12;
    bool holds = c.c_minus * c.c_minus * delta_sq <= w2_sq + kTol &&
                 w2_sq <= c.c_plus * c.c_plus * delta_sq + kTol;
    return {delta_sq, w2_sq, holds};
}

}  // namespace fluxfed
