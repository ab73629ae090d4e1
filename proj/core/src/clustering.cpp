#include "fluxfed/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fluxfed/errors.hpp"
#include "fluxfed/rng.hpp"

namespace fluxfed {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

Matrix pairwise_distances(const std::vector<DescriptorVector>& d) {
    const std::size_t n = d.size();
    Matrix dist(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double v = descriptor_distance(d[i], d[j]);
            dist.at(i, j) = v;
            dist.at(j, i) = v;
        }
    return dist;
}

// Renumber so cluster ids ascend with each cluster's smallest member index.
ClusterState canonicalize(std::vector<int> assignment,
                          const std::vector<DescriptorVector>& descriptors) {
    const int n = static_cast<int>(assignment.size());
    std::vector<int> first_member;  // first_member[new_id] = smallest member
    std::vector<int> remap(n, -1);  // old id -> new id
    for (int i = 0; i < n; ++i) {
        int old_id = assignment[i];
        if (remap[old_id] == -1) {
            remap[old_id] = static_cast<int>(first_member.size());
            first_member.push_back(i);
        }
    }
    ClusterState out;
    out.num_clusters = static_cast<int>(first_member.size());
    out.assignment.resize(assignment.size());
    for (int i = 0; i < n; ++i) out.assignment[i] = remap[assignment[i]];
    out.centroids =
        compute_centroids(descriptors, out.assignment, out.num_clusters, /*label_free=*/true);
    return out;
}

}  // namespace

std::vector<double> second_nn_curve(const std::vector<DescriptorVector>& descriptors) {
    const std::size_t n = descriptors.size();
    if (n < 3) throw ConfigError("second-NN curve needs at least 3 points");
    Matrix dist = pairwise_distances(descriptors);
    std::vector<double> curve(n);
    std::vector<double> others(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t k = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) others[k++] = dist.at(i, j);
        std::nth_element(others.begin(), others.begin() + 1, others.end());
        curve[i] = others[1];
    }
    std::sort(curve.begin(), curve.end());
    return curve;
}

double elbow_epsilon(const std::vector<double>& curve, double scale) {
    if (curve.empty()) throw ConfigError("elbow of an empty curve");
    if (!(scale > 0.0)) throw ConfigError("elbow scale must be > 0");
    const std::size_t n = curve.size();
    double lo = curve.front(), hi = curve.back();
    if (n == 1 || hi == lo) return curve[0] * scale;

    std::size_t elbow = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        double x = static_cast<double>(i) / static_cast<double>(n - 1);
        double y = (curve[i] - lo) / (hi - lo);
        double diff = y - x;
        if (diff > best) {  // strict: first index wins ties
            best = diff;
            elbow = i;
        }
    }
    return curve[elbow] * scale;
}

ClusterState dbscan_adaptive(const std::vector<DescriptorVector>& descriptors, double scale) {
    const std::size_t n = descriptors.size();
    if (n == 0) throw ConfigError("clustering over empty descriptor list");
    if (n < 3) {
        std::vector<int> assignment(n);
        std::iota(assignment.begin(), assignment.end(), 0);
        return canonicalize(std::move(assignment), descriptors);
    }

    double eps = elbow_epsilon(second_nn_curve(descriptors), scale);
    Matrix dist = pairwise_distances(descriptors);

    std::vector<std::vector<int>> neigh(n);  // closed ball, self excluded here
    std::vector<bool> core(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && dist.at(i, j) <= eps) neigh[i].push_back(static_cast<int>(j));
        core[i] = !neigh[i].empty();  // min_samples = 2 counting the point itself
    }

    constexpr int kUnset = -1;
    std::vector<int> label(n, kUnset);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!core[i] || label[i] != kUnset) continue;
        int cid = next++;
        std::vector<std::size_t> stack{i};
        label[i] = cid;
        while (!stack.empty()) {
            std::size_t p = stack.back();
            stack.pop_back();
            for (int q : neigh[p]) {
                auto qi = static_cast<std::size_t>(q);
                if (!core[qi] || label[qi] != kUnset) continue;
                label[qi] = cid;
                stack.push_back(qi);
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (label[i] != kUnset) continue;
        int owner = kUnset;  // lowest-id core point within eps
        for (int q : neigh[i]) {
            if (core[static_cast<std::size_t>(q)]) {
                owner = q;
                break;  // neighbors are in ascending id order
            }
        }
        label[i] = owner == kUnset ? next++ : label[static_cast<std::size_t>(owner)];
    }
    return canonicalize(std::move(label), descriptors);
}

KmeansResult kmeans_prior_detailed(const std::vector<DescriptorVector>& descriptors, int m,
                                   std::uint64_t seed, int max_iter) {
    const std::size_t n = descriptors.size();
    if (n == 0) throw ConfigError("clustering over empty descriptor list");
    if (m < 1 || static_cast<std::size_t>(m) > n)
        throw ConfigError("cluster count must satisfy 1 <= m <= n");
    const std::size_t dim = descriptors[0].values.size();
    for (const auto& d : descriptors)
        if (d.values.size() != dim) throw ConfigError("descriptor length mismatch");

    RngStream rng(seed);
    std::vector<std::vector<double>> centers;
    centers.reserve(static_cast<std::size_t>(m));

    // k-means++: first center uniform, the rest weighted by squared distance
    // to the nearest already-chosen center.
    centers.push_back(descriptors[rng.next_index(n)].values);
    std::vector<double> d2(n);
    while (centers.size() < static_cast<std::size_t>(m)) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) best = std::min(best, sq_dist(descriptors[i].values, c));
            d2[i] = best;
            total += best;
        }
        std::size_t pick;
        if (total <= 0.0) {
            pick = rng.next_index(n);  // all points coincide with a center
        } else {
            double u = rng.next_real() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (u < acc) {
                    pick = i;
                    break;
                }
            }
        }
        centers.push_back(descriptors[pick].values);
    }

    std::vector<int> assignment(n, -1);
    KmeansResult result;
    for (int iter = 0; iter < max_iter; ++iter) {
        std::vector<int> next(n);
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double bd = sq_dist(descriptors[i].values, centers[0]);
            for (int c = 1; c < m; ++c) {
                double d = sq_dist(descriptors[i].values, centers[static_cast<std::size_t>(c)]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            next[i] = best;
        }

        // Repair empty clusters: move the globally worst-fitting point there.
        std::vector<int> count(static_cast<std::size_t>(m), 0);
        for (int a : next) ++count[static_cast<std::size_t>(a)];
        for (int c = 0; c < m; ++c) {
            if (count[static_cast<std::size_t>(c)] > 0) continue;
            std::size_t worst = 0;
            double wd = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (count[static_cast<std::size_t>(next[i])] <= 1) continue;
                double d = sq_dist(descriptors[i].values,
                                   centers[static_cast<std::size_t>(next[i])]);
                if (d > wd) {
                    wd = d;
                    worst = i;
                }
            }
            --count[static_cast<std::size_t>(next[worst])];
            next[worst] = c;
            ++count[static_cast<std::size_t>(c)];
        }

        for (int c = 0; c < m; ++c) {
            auto& ctr = centers[static_cast<std::size_t>(c)];
            std::fill(ctr.begin(), ctr.end(), 0.0);
        }
        for (std::size_t i = 0; i < n; ++i) {
            auto& ctr = centers[static_cast<std::size_t>(next[i])];
            for (std::size_t j = 0; j < dim; ++j) ctr[j] += descriptors[i].values[j];
        }
        for (int c = 0; c < m; ++c) {
            auto& ctr = centers[static_cast<std::size_t>(c)];
            double inv = 1.0 / count[static_cast<std::size_t>(c)];
            for (double& x : ctr) x *= inv;
        }

        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            inertia += sq_dist(descriptors[i].values, centers[static_cast<std::size_t>(next[i])]);
        result.inertia.push_back(inertia);

        bool stable = next == assignment;
        assignment = std::move(next);
        if (stable) break;
    }

    result.state = canonicalize(std::move(assignment), descriptors);
    return result;
}

ClusterState kmeans_prior(const std::vector<DescriptorVector>& descriptors, int m,
                          std::uint64_t seed, int max_iter) {
    return kmeans_prior_detailed(descriptors, m, seed, max_iter).state;
}

int assign_nearest_centroid(const std::vector<double>& point,
                            const std::vector<std::vector<double>>& centroids) {
    if (centroids.empty()) throw ConfigError("assignment against empty centroid list");
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        if (centroids[c].size() != point.size())
            throw ConfigError("centroid/point dimension mismatch");
        double d = sq_dist(point, centroids[c]);
        if (d < bd) {  // strict: ties keep the lowest id
            bd = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

std::vector<std::vector<double>> compute_centroids(
    const std::vector<DescriptorVector>& descriptors, const std::vector<int>& assignment,
    int num_clusters, bool label_free) {
    if (descriptors.size() != assignment.size())
        throw ConfigError("assignment length does not match descriptor count");
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(num_clusters));
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        int a = assignment[i];
        if (a < 0 || a >= num_clusters) throw ConfigError("assignment id out of range");
        members[static_cast<std::size_t>(a)].push_back(i);
    }
    std::vector<std::vector<double>> out(static_cast<std::size_t>(num_clusters));
    for (int c = 0; c < num_clusters; ++c) {
        auto& idx = members[static_cast<std::size_t>(c)];
        if (idx.empty()) throw ConfigError("empty cluster has no centroid");
        // Sum in lexicographic value order: invariant to client relabeling.
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return descriptors[a].values < descriptors[b].values;
        });
        std::size_t dim = label_free ? descriptors[idx[0]].label_free_len
                                     : descriptors[idx[0]].values.size();
        std::vector<double> ctr(dim, 0.0);
        for (std::size_t i : idx) {
            if ((label_free ? descriptors[i].label_free_len : descriptors[i].values.size()) != dim)
                throw ConfigError("descriptor length mismatch");
            for (std::size_t j = 0; j < dim; ++j) ctr[j] += descriptors[i].values[j];
        }
        double inv = 1.0 / static_cast<double>(idx.size());
        for (double& x : ctr) x *= inv;
        out[static_cast<std::size_t>(c)] = std::move(ctr);
    }
    return out;
}

}  // namespace fluxfed
