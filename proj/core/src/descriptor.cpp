#include "fluxfed/descriptor.hpp"

#include <algorithm>
#include <cmath>

#include "fluxfed/errors.hpp"
#include "fluxfed/jacobi.hpp"

namespace fluxfed {

AlignmentBounds local_bounds(const Matrix& latents) {
    if (latents.rows == 0 || latents.cols == 0)
        throw ConfigError("bounds require a non-empty latent matrix");
    AlignmentBounds b;
    b.lo.assign(latents.cols, 0.0);
    b.hi.assign(latents.cols, 0.0);
    for (std::size_t j = 0; j < latents.cols; ++j) {
        double lo = latents.at(0, j), hi = latents.at(0, j);
        for (std::size_t i = 1; i < latents.rows; ++i) {
            lo = std::min(lo, latents.at(i, j));
            hi = std::max(hi, latents.at(i, j));
        }
        b.lo[j] = lo;
        b.hi[j] = hi;
    }
    return b;
}

AlignmentBounds merge_bounds(const std::vector<AlignmentBounds>& all) {
    if (all.empty()) throw ConfigError("merge over empty bounds list");
    AlignmentBounds out = all[0];
    for (std::size_t k = 1; k < all.size(); ++k) {
        if (all[k].lo.size() != out.lo.size())
            throw ConfigError("bounds dimension mismatch in merge");
        for (std::size_t j = 0; j < out.lo.size(); ++j) {
            out.lo[j] = std::min(out.lo[j], all[k].lo[j]);
            out.hi[j] = std::max(out.hi[j], all[k].hi[j]);
        }
    }
    return out;
}

PcaMap fit_shared_pca(const AlignmentBounds& bounds, std::size_t l, std::size_t n_points,
                      std::uint64_t seed) {
    const std::size_t v = bounds.lo.size();
    if (v == 0 || bounds.hi.size() != v) throw ConfigError("malformed alignment bounds");
    if (l == 0 || l > v) throw ConfigError("projection dimension must satisfy 1 <= l <= v");
    if (n_points < 2) throw ConfigError("need at least 2 box samples");

    std::size_t positive_width = 0;
    for (std::size_t j = 0; j < v; ++j) {
        if (bounds.hi[j] < bounds.lo[j]) throw ConfigError("inverted alignment bounds");
        if (bounds.hi[j] > bounds.lo[j]) ++positive_width;
    }
    if (positive_width < l) throw ConfigError("zero-volume alignment box");

    RngStream rng(seed);
    Matrix pts(n_points, v);
    for (std::size_t i = 0; i < n_points; ++i)
        for (std::size_t j = 0; j < v; ++j)
            pts.at(i, j) = bounds.lo[j] + rng.next_real() * (bounds.hi[j] - bounds.lo[j]);

    std::vector<double> mean(v, 0.0);
    for (std::size_t i = 0; i < n_points; ++i)
        for (std::size_t j = 0; j < v; ++j) mean[j] += pts.at(i, j);
    for (double& m : mean) m /= static_cast<double>(n_points);

    Matrix cov(v, v);
    for (std::size_t i = 0; i < n_points; ++i) {
        for (std::size_t a = 0; a < v; ++a) {
            double da = pts.at(i, a) - mean[a];
            for (std::size_t b = a; b < v; ++b)
                cov.at(a, b) += da * (pts.at(i, b) - mean[b]);
        }
    }
    double inv_n = 1.0 / static_cast<double>(n_points);
    for (std::size_t a = 0; a < v; ++a)
        for (std::size_t b = a; b < v; ++b) {
            cov.at(a, b) *= inv_n;
            cov.at(b, a) = cov.at(a, b);
        }

    EigenDecomposition eig = jacobi_eigen_symmetric(cov, 1e-12);

    PcaMap map;
    map.mean = std::move(mean);
    map.components = Matrix(l, v);
    for (std::size_t r = 0; r < l; ++r) {
        // Sign convention: make the largest-magnitude entry positive.
        std::size_t arg = 0;
        for (std::size_t j = 1; j < v; ++j)
            if (std::fabs(eig.vectors.at(j, r)) > std::fabs(eig.vectors.at(arg, r))) arg = j;
        double flip = eig.vectors.at(arg, r) < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < v; ++j)
            map.components.at(r, j) = flip * eig.vectors.at(j, r);
    }
    return map;
}

std::vector<double> projected_box_widths(const PcaMap& pca, const AlignmentBounds& bounds) {
    if (bounds.lo.size() != pca.in_dim()) throw ConfigError("bounds/map dimension mismatch");
    std::vector<double> w(pca.out_dim(), 0.0);
    for (std::size_t r = 0; r < pca.out_dim(); ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < pca.in_dim(); ++j)
            acc += std::fabs(pca.components.at(r, j)) * (bounds.hi[j] - bounds.lo[j]);
        w[r] = acc;
    }
    return w;
}

// One Laplace(0, b) draw via inverse CDF; the uniform is strictly inside (0,1).
double laplace_draw(double b, RngStream& rng) {
    double u = rng.next_real_open();
    return u < 0.5 ? b * std::log(2.0 * u) : -b * std::log(2.0 * (1.0 - u));
}

namespace {

// Population moments of the rows of `proj` restricted to `idx` (nullptr = all rows).
void moments(const Matrix& proj, const std::vector<std::size_t>* idx, double* mu, double* sd) {
    const std::size_t l = proj.cols;
    const std::size_t n = idx ? idx->size() : proj.rows;
    for (std::size_t c = 0; c < l; ++c) mu[c] = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double* row = proj.row(idx ? (*idx)[t] : t);
        for (std::size_t c = 0; c < l; ++c) mu[c] += row[c];
    }
    for (std::size_t c = 0; c < l; ++c) mu[c] /= static_cast<double>(n);
    for (std::size_t c = 0; c < l; ++c) sd[c] = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double* row = proj.row(idx ? (*idx)[t] : t);
        for (std::size_t c = 0; c < l; ++c) {
            double d = row[c] - mu[c];
            sd[c] += d * d;
        }
    }
    for (std::size_t c = 0; c < l; ++c) sd[c] = std::sqrt(sd[c] / static_cast<double>(n));
}

}  // namespace

DescriptorVector extract_descriptor(const Matrix& latents, const std::vector<int>* labels,
                                    std::size_t num_classes, const PcaMap& pca,
                                    const DescriptorOptions& options, const DpParams* dp,
                                    RngStream* dp_rng) {
    const std::size_t s = latents.rows;
    const std::size_t l = pca.out_dim();
    if (s < 2) throw ConfigError("descriptor needs at least 2 samples");
    if (latents.cols != pca.in_dim()) throw ConfigError("latent/map dimension mismatch");
    if (labels && labels->size() != s) throw ConfigError("label count does not match latents");
    if (num_classes < 1) throw ConfigError("num_classes must be >= 1");

    Matrix proj(s, l);
    for (std::size_t i = 0; i < s; ++i) {
        const double* x = latents.row(i);
        for (std::size_t r = 0; r < l; ++r) {
            const double* comp = pca.components.row(r);
            double acc = 0.0;
            for (std::size_t j = 0; j < latents.cols; ++j)
                acc += comp[j] * (x[j] - pca.mean[j]);
            proj.at(i, r) = acc;
        }
    }

    const std::size_t per_block = options.include_sigma ? 2 * l : l;
    const std::size_t blocks = options.include_class_blocks ? 1 + num_classes : 1;
    DescriptorVector d;
    d.values.assign(per_block * blocks, 0.0);
    d.label_free_len = per_block;
    d.sample_count = s;

    std::vector<double> mu(l), sd(l);
    auto emit = [&](std::size_t block, const double* m, const double* s_) {
        double* out = d.values.data() + block * per_block;
        std::copy(m, m + l, out);
        if (options.include_sigma) std::copy(s_, s_ + l, out + l);
    };

    moments(proj, nullptr, mu.data(), sd.data());
    emit(0, mu.data(), sd.data());

    if (options.include_class_blocks && labels) {
        std::vector<std::vector<std::size_t>> by_class(num_classes);
        for (std::size_t i = 0; i < s; ++i) {
            int y = (*labels)[i];
            if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
                throw ConfigError("label outside [0, num_classes)");
            by_class[static_cast<std::size_t>(y)].push_back(i);
        }
        for (std::size_t u = 0; u < num_classes; ++u) {
            if (by_class[u].empty()) continue;  // absent class: block stays zero
            moments(proj, &by_class[u], mu.data(), sd.data());
            emit(1 + u, mu.data(), sd.data());
        }
    }

    if (dp) {
        if (!(dp->epsilon > 0.0)) throw ConfigError("dp epsilon must be > 0");
        if (!dp_rng) throw ConfigError("dp noise requires an rng stream");
        std::vector<double> width = projected_box_widths(pca, dp->bounds);
        for (std::size_t i = 0; i < d.values.size(); ++i) {
            std::size_t within = i % per_block;    // position inside its block
            std::size_t comp = within % l;         // component index
            bool is_sigma = options.include_sigma && within >= l;
            double range = is_sigma ? width[comp] / 2.0 : width[comp];
            double b = range / (static_cast<double>(s) * dp->epsilon);
            d.values[i] += laplace_draw(b, *dp_rng);
        }
        d.dp_epsilon = dp->epsilon;
    }
    return d;
}

double descriptor_distance(const DescriptorVector& a, const DescriptorVector& b,
                           bool label_free) {
    std::size_t n;
    if (label_free) {
        if (a.label_free_len != b.label_free_len)
            throw ConfigError("label-free prefix length mismatch");
        n = a.label_free_len;
    } else {
        if (a.values.size() != b.values.size()) throw ConfigError("descriptor length mismatch");
        n = a.values.size();
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double diff = a.values[i] - b.values[i];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

}  // namespace fluxfed
