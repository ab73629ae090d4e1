#include "fluxfed/jacobi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fluxfed/errors.hpp"

namespace fluxfed {

EigenDecomposition jacobi_eigen_symmetric(const Matrix& a, double tol, int max_sweeps) {
    if (a.rows != a.cols) throw ConfigError("eigendecomposition requires a square matrix");
    const std::size_t n = a.rows;
    Matrix m = a;
    Matrix v(n, n);
    for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::fabs(m.at(p, q)));
        if (off < tol) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = m.at(p, q);
                if (std::fabs(apq) < tol) continue;
                double app = m.at(p, p);
                double aqq = m.at(q, q);
                double theta = (aqq - app) / (2.0 * apq);
                // Smaller-angle root keeps the rotation sequence stable.
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    double mkp = m.at(k, p), mkq = m.at(k, q);
                    m.at(k, p) = c * mkp - s * mkq;
                    m.at(k, q) = s * mkp + c * mkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double mpk = m.at(p, k), mqk = m.at(q, k);
                    m.at(p, k) = c * mpk - s * mqk;
                    m.at(q, k) = s * mpk + c * mqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double vkp = v.at(k, p), vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - s * vkq;
                    v.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = m.at(i, i);
    std::stable_sort(idx.begin(), idx.end(),
                     [&diag](std::size_t x, std::size_t y) { return diag[x] > diag[y]; });

    EigenDecomposition out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = diag[idx[j]];
        for (std::size_t i = 0; i < n; ++i) out.vectors.at(i, j) = v.at(i, idx[j]);
    }
    return out;
}

}  // namespace fluxfed
