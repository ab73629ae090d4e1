#include <doctest.h>

#include <cmath>
#include <vector>

#include "fluxfed/errors.hpp"
#include "fluxfed/gauss_metric.hpp"
#include "fluxfed/rng.hpp"

using namespace fluxfed;

namespace {

// Test-local dense machinery for the general-covariance oracle. Kept fully
// independent of the library (classical largest-pivot Jacobi, not the cyclic
// sweep in core) so agreement means two implementations, not one.
struct Dense {
    std::size_t n = 0;
    std::vector<double> a;  // row-major

    explicit Dense(std::size_t n_) : n(n_), a(n_ * n_, 0.0) {}
    double& at(std::size_t i, std::size_t j) { return a[i * n + j]; }
    double at(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

Dense multiply(const Dense& x, const Dense& y) {
    Dense out(x.n);
    for (std::size_t i = 0; i < x.n; ++i)
        for (std::size_t k = 0; k < x.n; ++k) {
            double v = x.at(i, k);
            for (std::size_t j = 0; j < x.n; ++j) out.at(i, j) += v * y.at(k, j);
        }
    return out;
}

// Classical Jacobi: repeatedly annihilate the largest off-diagonal entry.
void eigen_sym(Dense a, std::vector<double>& values, Dense& vectors) {
    const std::size_t n = a.n;
    vectors = Dense(n);
    for (std::size_t i = 0; i < n; ++i) vectors.at(i, i) = 1.0;
    for (int iter = 0; iter < 10000; ++iter) {
        std::size_t p = 0, q = 1;
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (std::fabs(a.at(i, j)) > off) {
                    off = std::fabs(a.at(i, j));
                    p = i;
                    q = j;
                }
        if (off < 1e-14) break;
        double theta = 0.5 * std::atan2(2.0 * a.at(p, q), a.at(q, q) - a.at(p, p));
        double c = std::cos(theta), s = std::sin(theta);
        for (std::size_t k = 0; k < n; ++k) {
            double akp = a.at(k, p), akq = a.at(k, q);
            a.at(k, p) = c * akp - s * akq;
            a.at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
            double apk = a.at(p, k), aqk = a.at(q, k);
            a.at(p, k) = c * apk - s * aqk;
            a.at(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
            double vkp = vectors.at(k, p), vkq = vectors.at(k, q);
            vectors.at(k, p) = c * vkp - s * vkq;
            vectors.at(k, q) = s * vkp + c * vkq;
        }
    }
    values.resize(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = a.at(i, i);
}

Dense sqrt_psd(const Dense& c) {
    std::vector<double> values;
    Dense vectors(c.n);
    eigen_sym(c, values, vectors);
    Dense out(c.n);
    for (std::size_t i = 0; i < c.n; ++i)
        for (std::size_t j = 0; j < c.n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < c.n; ++k)
                acc += vectors.at(i, k) * std::sqrt(std::max(values[k], 0.0)) *
                       vectors.at(j, k);
            out.at(i, j) = acc;
        }
    return out;
}

// W2^2 = |m1-m2|^2 + tr C1 + tr C2 - 2 tr sqrt(sqrt(C1) C2 sqrt(C1)).
double oracle_w2_sq(const std::vector<double>& m1, const Dense& c1,
                    const std::vector<double>& m2, const Dense& c2) {
    const std::size_t n = c1.n;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = m1[i] - m2[i];
        acc += d * d;
    }
    for (std::size_t i = 0; i < n; ++i) acc += c1.at(i, i) + c2.at(i, i);
    Dense s1 = sqrt_psd(c1);
    Dense inner = multiply(multiply(s1, c2), s1);
    std::vector<double> values;
    Dense vectors(n);
    eigen_sym(inner, values, vectors);
    for (double v : values) acc -= 2.0 * std::sqrt(std::max(v, 0.0));
    return acc;
}

GaussianSummary random_summary(std::size_t dim, RngStream& rng, double var_lo, double var_hi) {
    GaussianSummary g;
    g.mean.resize(dim);
    g.sigma.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        g.mean[i] = 2.0 * rng.next_gaussian();
        g.sigma[i] = std::sqrt(var_lo + rng.next_real() * (var_hi - var_lo));
    }
    return g;
}

// Random orthogonal matrix: eigenvectors of a random symmetric matrix.
Dense random_rotation(std::size_t n, RngStream& rng) {
    Dense sym(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            double v = rng.next_gaussian();
            sym.at(i, j) = v;
            sym.at(j, i) = v;
        }
    std::vector<double> values;
    Dense vectors(n);
    eigen_sym(sym, values, vectors);
    return vectors;
}

}  // namespace

TEST_SUITE("gaussmetric") {

TEST_CASE("one-dimensional hand values") {
    GaussianSummary a{{0.0}, {1.0}}, b{{2.0}, {1.0}};
    CHECK(w2_gaussian_diag(a, b) == doctest::Approx(2.0).epsilon(1e-15));

    GaussianSummary c{{0.0}, {1.0}}, d{{0.0}, {2.0}};
    CHECK(w2_gaussian_diag(c, d) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("bound constants") {
    BoundConstants c = prop_constants(1.0, 1.0);
    CHECK(c.c_minus == 0.5);
    CHECK(c.c_plus == 1.0);

    c = prop_constants(0.25, 0.25);
    CHECK(c.c_minus == 1.0);
    CHECK(c.c_plus == 1.0);

    c = prop_constants(0.01, 1.0);
    CHECK(c.c_plus == 5.0);

    CHECK_THROWS(prop_constants(0.0, 1.0));
    CHECK_THROWS(prop_constants(2.0, 1.0));
}

TEST_CASE("metric axioms") {
    RngStream rng(314);
    for (int trial = 0; trial < 10000; ++trial) {
        std::size_t dim = 1 + rng.next_index(6);
        GaussianSummary a = random_summary(dim, rng, 0.2, 3.0);
        GaussianSummary b = random_summary(dim, rng, 0.2, 3.0);
        GaussianSummary c = random_summary(dim, rng, 0.2, 3.0);
        double ab = w2_gaussian_diag(a, b);
        double ba = w2_gaussian_diag(b, a);
        CHECK(ab == ba);  // same summation order both ways
        CHECK(ab >= 0.0);
        CHECK(w2_gaussian_diag(a, a) == 0.0);
        CHECK(ab <= w2_gaussian_diag(a, c) + w2_gaussian_diag(c, b) + 1e-10);
    }
}

TEST_CASE("sandwich bound edge cases") {
    GaussianSummary a{{1.0, -1.0}, {1.0, 1.2}};
    BoundCheck self = check_w2_bound(a, a, 0.5, 2.0);
    CHECK(self.delta_sq == 0.0);
    CHECK(self.w2_sq == 0.0);
    CHECK(self.holds);

    // Pure mean shift: delta^2 and W2^2 coincide.
    GaussianSummary b{{4.0, -1.0}, {1.0, 1.2}};
    BoundCheck shifted = check_w2_bound(a, b, 0.5, 2.0);
    CHECK(shifted.delta_sq == doctest::Approx(9.0).epsilon(1e-15));
    CHECK(shifted.w2_sq == doctest::Approx(9.0).epsilon(1e-15));
    CHECK(shifted.holds);

    GaussianSummary wide{{0.0}, {3.0}};  // variance 9 outside [0.5, 2]
    GaussianSummary unit{{0.0}, {1.0}};
    CHECK_THROWS(check_w2_bound(wide, unit, 0.5, 2.0));
}

TEST_CASE("sandwich bound holds on random pairs") {
    RngStream rng(1000);
    for (int trial = 0; trial < 10000; ++trial) {
        std::size_t dim = 1 + rng.next_index(16);
        GaussianSummary a = random_summary(dim, rng, 0.5, 2.0);
        GaussianSummary b = random_summary(dim, rng, 0.5, 2.0);
        BoundCheck r = check_w2_bound(a, b, 0.5, 2.0);
        CHECK(r.holds);
    }
}

TEST_CASE("diagonal fast path matches the dense oracle") {
    RngStream rng(555);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t dim = 2 + rng.next_index(6);
        GaussianSummary a = random_summary(dim, rng, 0.3, 2.5);
        GaussianSummary b = random_summary(dim, rng, 0.3, 2.5);
        Dense c1(dim), c2(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            c1.at(i, i) = a.sigma[i] * a.sigma[i];
            c2.at(i, i) = b.sigma[i] * b.sigma[i];
        }
        double fast = w2_gaussian_diag(a, b);
        double slow_sq = oracle_w2_sq(a.mean, c1, b.mean, c2);
        CHECK(std::fabs(fast * fast - slow_sq) <= 1e-10);
    }
}

TEST_CASE("rotating a commuting pair preserves the distance") {
    RngStream rng(777);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t dim = 2 + rng.next_index(4);
        GaussianSummary a = random_summary(dim, rng, 0.3, 2.5);
        GaussianSummary b = random_summary(dim, rng, 0.3, 2.5);
        Dense rot = random_rotation(dim, rng);

        // C = R D R^T and rotated means; the pair still commutes, so the
        // diagonal formula on the original summaries must match the dense
        // oracle on the rotated ones.
        Dense c1(dim), c2(dim);
        std::vector<double> m1(dim, 0.0), m2(dim, 0.0);
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j) {
                m1[i] += rot.at(i, j) * a.mean[j];
                m2[i] += rot.at(i, j) * b.mean[j];
                double acc1 = 0.0, acc2 = 0.0;
                for (std::size_t k = 0; k < dim; ++k) {
                    acc1 += rot.at(i, k) * a.sigma[k] * a.sigma[k] * rot.at(j, k);
                    acc2 += rot.at(i, k) * b.sigma[k] * b.sigma[k] * rot.at(j, k);
                }
                c1.at(i, j) = acc1;
                c2.at(i, j) = acc2;
            }
        double fast = w2_gaussian_diag(a, b);
        double slow_sq = oracle_w2_sq(m1, c1, m2, c2);
        CHECK(std::fabs(fast * fast - slow_sq) <= 1e-10);
    }
}

TEST_CASE("dimension mismatch is rejected") {
    GaussianSummary a{{0.0}, {1.0}}, b{{0.0, 0.0}, {1.0, 1.0}};
    CHECK_THROWS(w2_gaussian_diag(a, b));
    GaussianSummary bad{{0.0}, {-1.0}};
    CHECK_THROWS(w2_gaussian_diag(bad, a));
}

}  // TEST_SUITE
