#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fluxfed/dataset.hpp"

namespace fluxfed {

enum class ShiftType { FeatureShift, LabelShift, ConceptYgivenX, ConceptXgivenY };

ShiftType shift_type_from_string(const std::string& s);
std::string to_string(ShiftType t);

struct ShiftSpec {
    ShiftType type = ShiftType::FeatureShift;
    int level = 1;              // 1 (mildest) .. 8 (harshest)
    int num_distributions = 1;  // M
};

// Resolved per-distribution generator parameters. Built once per federation
// seed; training clients, late joiners, and test clients all sample from the
// same plan so "same distribution id" means "same law".
struct DistributionParams {
    double rotation_deg = 0.0;          // FeatureShift: rotation in the (0,1) plane
    std::vector<double> offset;         // FeatureShift: additive color offset (may be all-zero)
    std::vector<int> class_subset;      // LabelShift: classes this distribution keeps
    std::vector<int> pool;              // ConceptYgivenX: swapped classes
    std::vector<int> pool_perm;         // ConceptYgivenX: pool[i] relabels to pool_perm[i]
    std::vector<int> augmented_classes; // ConceptXgivenY: classes whose features rotate
    double aug_rotation_deg = 0.0;      // ConceptXgivenY: this distribution's angle
};

struct FederationPlan {
    std::size_t num_classes = 0;
    std::size_t feature_dim = 0;
    ShiftSpec shift;
    Matrix class_means;  // U x z isotropic blob centers
    std::vector<DistributionParams> distributions;
};

struct SyntheticParams {
    std::size_t num_classes = 6;
    std::size_t feature_dim = 256;
    std::size_t samples_per_client = 600;
    double blob_spacing = 3.0;    // norm of each class mean
    double offset_scale = 4.0;    // norm of each color offset
};

// Resolves level menus and per-distribution draws. Fails on invalid levels,
// LabelShift leaving < 2 classes, ConceptYgivenX pools exceeding U, or more
// LabelShift distributions than the 5-subset bank can keep distinct.
FederationPlan build_plan(const SyntheticParams& params, const ShiftSpec& shift,
                          std::uint64_t seed);

// K training clients. Distribution ids round-robin (k mod M) then shuffled, so
// every id is used when K >= M. Base draw per client: labels uniform over the
// distribution's class set, features = blob(label) + N(0, I); the shift
// transform is applied on top. ConceptYgivenX renames labels only, leaving the
// feature matrix bit-identical to a no-shift run with the same seed.
std::vector<ClientDataset> gen_synthetic_federation(std::size_t num_clients,
                                                    const SyntheticParams& params,
                                                    const ShiftSpec& shift, std::uint64_t seed);

// Unseen clients drawn from the same plan, `per_distribution` each, with ids
// starting at first_id (client streams are id-keyed, so ids must not collide
// with training ids).
std::vector<ClientDataset> gen_test_clients(const FederationPlan& plan,
                                            const SyntheticParams& params,
                                            std::size_t per_distribution, int first_id,
                                            std::uint64_t seed);

}  // namespace fluxfed
