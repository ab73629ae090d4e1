#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fluxfed/matrix.hpp"
#include "fluxfed/rng.hpp"

namespace fluxfed {

// Per-coordinate min/max of observed latent activations.
struct AlignmentBounds {
    std::vector<double> lo;
    std::vector<double> hi;
};

// Shared linear map fitted once and broadcast: project(x) = C * (x - mean).
// components holds the l projection directions as rows (orthonormal).
struct PcaMap {
    std::vector<double> mean;
    Matrix components;  // l x v

    std::size_t out_dim() const { return components.rows; }
    std::size_t in_dim() const { return components.cols; }
};

// Ablation switches. Defaults give the canonical layout
//   [mu_x, sigma_x, mu_0, sigma_0, ..., mu_{U-1}, sigma_{U-1}]
// of length 2*(U+1)*l with a label-free prefix of 2*l.
struct DescriptorOptions {
    bool include_sigma = true;
    bool include_class_blocks = true;
};

struct DpParams {
    double epsilon;          // privacy budget; > 0
    AlignmentBounds bounds;  // broadcast box the sensitivity is computed from
};

struct DescriptorVector {
    std::vector<double> values;
    std::size_t label_free_len = 0;  // prefix usable without labels
    std::size_t sample_count = 0;    // s for this client
    std::optional<double> dp_epsilon;
};

// Observed per-coordinate activation range. Requires at least one row.
AlignmentBounds local_bounds(const Matrix& latents);

// Elementwise union of client boxes. Requires a non-empty, dimension-consistent list.
AlignmentBounds merge_bounds(const std::vector<AlignmentBounds>& all);

// Fits the shared projection: n_points uniform samples inside the box (one
// SplitMix64 stream from `seed`), centered, eigenvectors of the sample
// covariance via cyclic Jacobi (tol 1e-12), top-l rows sorted by descending
// eigenvalue. Sign fixed per component: the largest-magnitude entry (first on
// ties) is made positive. Identical (bounds, l, n_points, seed) give a
// bit-identical map on every party.
// Throws "zero-volume alignment box" when fewer than l coordinates have
// positive width (not enough rank for l well-defined components).
PcaMap fit_shared_pca(const AlignmentBounds& bounds, std::size_t l, std::size_t n_points,
                      std::uint64_t seed);

// Moment profile of the projected latents. With labels: marginal block plus one
// block per class id in [0, num_classes), absent classes all-zero. Without
// labels: class blocks are zero (the label-free prefix is all a test client
// can produce). Std deviations are population (1/s) and non-negative before
// any noise. With dp: adds per-coordinate Laplace noise, scale
// Range(coord)/(s * epsilon), where Range is the projected box width for mean
// coordinates and half that for sigma coordinates; one inverse-CDF draw per
// coordinate from `dp_rng`. Requires s >= 2.
DescriptorVector extract_descriptor(const Matrix& latents, const std::vector<int>* labels,
                                    std::size_t num_classes, const PcaMap& pca,
                                    const DescriptorOptions& options = {},
                                    const DpParams* dp = nullptr, RngStream* dp_rng = nullptr);

// Euclidean distance over full vectors, or over the label-free prefixes when
// label_free is set. Lengths (and prefix lengths) must agree.
double descriptor_distance(const DescriptorVector& a, const DescriptorVector& b,
                           bool label_free = false);

// Projected box width along each component row: sum_j |C[c][j]| * (hi_j - lo_j).
std::vector<double> projected_box_widths(const PcaMap& pca, const AlignmentBounds& bounds);

// One Laplace(0, b) draw: inverse CDF applied to a single open-interval
// uniform from `rng`. Exposed so samplers can be validated statistically.
double laplace_draw(double b, RngStream& rng);

}  // namespace fluxfed
