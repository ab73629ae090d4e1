#pragma once

#include <cstdint>
#include <vector>

#include "fluxfed/descriptor.hpp"

namespace fluxfed {

// Partition of clients. assignment[i] in [0, num_clusters); ids are canonical:
// clusters ordered by their smallest member index. centroids[m] is the mean of
// the members' label-free prefixes.
struct ClusterState {
    int num_clusters = 0;
    std::vector<int> assignment;
    std::vector<std::vector<double>> centroids;
};

// Sorted (ascending) distance from each point to its second-nearest other
// point, full-descriptor metric. Requires >= 3 points.
std::vector<double> second_nn_curve(const std::vector<DescriptorVector>& descriptors);

// Elbow of a sorted curve: x and y normalized to [0,1], elbow = argmax of
// (y_norm - x_norm), first index on ties; returns curve[elbow] * scale.
// A constant curve yields curve[0] * scale.
double elbow_epsilon(const std::vector<double>& curve, double scale);

// Density clustering with the radius chosen from the data: eps =
// elbow_epsilon(second_nn_curve(d), scale), min_samples = 2 counting the point
// itself, closed balls (<= eps). Core points chain into clusters; a non-core
// point within eps of a core point joins the cluster of the lowest-id such
// core; unreachable points become singletons. Fewer than 3 descriptors fall
// back to all-singletons.
ClusterState dbscan_adaptive(const std::vector<DescriptorVector>& descriptors,
                             double scale = 1.0);

struct KmeansResult {
    ClusterState state;
    std::vector<double> inertia;  // sum of squared member-centroid distances, per iteration
};

// Lloyd iterations over full descriptors with k-means++ seeding from `seed`.
// An emptied cluster steals the point farthest from its current centroid.
// Stops when assignments stabilize or after max_iter rounds.
KmeansResult kmeans_prior_detailed(const std::vector<DescriptorVector>& descriptors, int m,
                                   std::uint64_t seed, int max_iter = 100);
ClusterState kmeans_prior(const std::vector<DescriptorVector>& descriptors, int m,
                          std::uint64_t seed, int max_iter = 100);

// Index of the nearest centroid (Euclidean; ties -> lowest id).
int assign_nearest_centroid(const std::vector<double>& point,
                            const std::vector<std::vector<double>>& centroids);

// Mean of each cluster's member vectors (full descriptors, or label-free
// prefixes). Members are summed in a label-independent canonical order so the
// result is bit-identical under any relabeling of client ids.
std::vector<std::vector<double>> compute_centroids(
    const std::vector<DescriptorVector>& descriptors, const std::vector<int>& assignment,
    int num_clusters, bool label_free);

}  // namespace fluxfed
