#include "fluxfed/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fluxfed/errors.hpp"
#include "fluxfed/rng.hpp"

namespace fluxfed {

ShiftType shift_type_from_string(const std::string& s) {
    if (s == "feature_shift" || s == "FeatureShift") return ShiftType::FeatureShift;
    if (s == "label_shift" || s == "LabelShift") return ShiftType::LabelShift;
    if (s == "concept_y_given_x" || s == "ConceptYgivenX") return ShiftType::ConceptYgivenX;
    if (s == "concept_x_given_y" || s == "ConceptXgivenY") return ShiftType::ConceptXgivenY;
    throw ConfigError("shift_type: expected feature_shift|label_shift|concept_y_given_x|"
                      "concept_x_given_y, got \"" + s + "\"");
}

std::string to_string(ShiftType t) {
    switch (t) {
        case ShiftType::FeatureShift: return "feature_shift";
        case ShiftType::LabelShift: return "label_shift";
        case ShiftType::ConceptYgivenX: return "concept_y_given_x";
        case ShiftType::ConceptXgivenY: return "concept_x_given_y";
    }
    throw ConfigError("invalid shift type value");
}

namespace {

// Level menus. Levels 1-4: widening rotation sets, single color; levels 5-8:
// the same rotation ladder crossed with 3 colors (additive offsets).
const std::vector<double>& rotation_menu(int level) {
    static const std::vector<double> r2{0.0, 180.0};
    static const std::vector<double> r3{0.0, 120.0, 240.0};
    static const std::vector<double> r4{0.0, 90.0, 180.0, 270.0};
    static const std::vector<double> r5{0.0, 72.0, 144.0, 216.0, 288.0};
    switch ((level - 1) % 4) {
        case 0: return r2;
        case 1: return r3;
        case 2: return r4;
        default: return r5;
    }
}

int num_colors(int level) { return level <= 4 ? 1 : 3; }

std::vector<double> random_direction(std::size_t dim, double norm, RngStream& rng) {
    std::vector<double> v(dim);
    double n2 = 0.0;
    for (double& x : v) {
        x = rng.next_gaussian();
        n2 += x * x;
    }
    double scale = norm / std::sqrt(n2);
    for (double& x : v) x *= scale;
    return v;
}

std::vector<int> sorted_subset(std::size_t universe, std::size_t size, RngStream& rng) {
    std::vector<int> ids(universe);
    std::iota(ids.begin(), ids.end(), 0);
    rng.shuffle(ids);
    ids.resize(size);
    std::sort(ids.begin(), ids.end());
    return ids;
}

void rotate01(double* row, double deg) {
    if (deg == 0.0) return;
    double rad = deg * M_PI / 180.0;
    double c = std::cos(rad), s = std::sin(rad);
    double x0 = row[0], x1 = row[1];
    row[0] = c * x0 - s * x1;
    row[1] = s * x0 + c * x1;
}

}  // namespace

FederationPlan build_plan(const SyntheticParams& params, const ShiftSpec& shift,
                          std::uint64_t seed) {
    const std::size_t U = params.num_classes;
    const std::size_t z = params.feature_dim;
    const int M = shift.num_distributions;
    if (U < 2) throw ConfigError("num_classes must be >= 2");
    if (z < 2) throw ConfigError("feature_dim must be >= 2");
    if (shift.level < 1 || shift.level > 8) throw ConfigError("level must be in [1, 8]");
    if (M < 1) throw ConfigError("num_distributions must be >= 1");

    RngStream rng = derive_stream(seed, stream_tag::kDataPlan, 0);

    FederationPlan plan;
    plan.num_classes = U;
    plan.feature_dim = z;
    plan.shift = shift;
    plan.class_means = Matrix(U, z);
    for (std::size_t u = 0; u < U; ++u) {
        std::vector<double> m = random_direction(z, params.blob_spacing, rng);
        std::copy(m.begin(), m.end(), plan.class_means.row(u));
    }
    plan.distributions.resize(static_cast<std::size_t>(M));

    switch (shift.type) {
        case ShiftType::FeatureShift: {
            const std::vector<double>& rots = rotation_menu(shift.level);
            const int colors = num_colors(shift.level);
            std::vector<std::vector<double>> color_offsets(static_cast<std::size_t>(colors));
            color_offsets[0].assign(z, 0.0);  // color 0 = untinted
            for (int c = 1; c < colors; ++c)
                color_offsets[static_cast<std::size_t>(c)] =
                    random_direction(z, params.offset_scale, rng);
            // Ring assignment: colors advance fastest so nearby distribution ids
            // differ maximally; seed-dependent ring offsets vary the draw.
            std::uint64_t start_c = rng.next_index(static_cast<std::uint64_t>(colors));
            std::uint64_t start_r = rng.next_index(rots.size());
            for (int d = 0; d < M; ++d) {
                auto& dist = plan.distributions[static_cast<std::size_t>(d)];
                std::uint64_t c = (start_c + static_cast<std::uint64_t>(d)) %
                                  static_cast<std::uint64_t>(colors);
                std::uint64_t r =
                    (start_r + static_cast<std::uint64_t>(d) / static_cast<std::uint64_t>(colors)) %
                    rots.size();
                dist.rotation_deg = rots[r];
                dist.offset = color_offsets[c];
            }
            break;
        }
        case ShiftType::LabelShift: {
            int kept = static_cast<int>(U) - (shift.level - 1);
            if (kept < 2) throw ConfigError("LabelShift leaves fewer than 2 classes");
            if (M > 5) throw ConfigError("LabelShift supports at most 5 distributions (subset bank)");
            std::vector<std::vector<int>> bank;
            std::set<std::vector<int>> seen;
            for (int b = 0; b < 5; ++b) {
                std::vector<int> subset;
                for (int attempt = 0; attempt < 64; ++attempt) {
                    subset = sorted_subset(U, static_cast<std::size_t>(kept), rng);
                    if (seen.insert(subset).second) break;
                }
                bank.push_back(subset);
            }
            if (static_cast<int>(seen.size()) < M)
                throw ConfigError("class universe too small for distinct LabelShift subsets");
            std::uint64_t start = rng.next_index(5);
            for (int d = 0; d < M; ++d)
                plan.distributions[static_cast<std::size_t>(d)].class_subset =
                    bank[(start + static_cast<std::uint64_t>(d)) % 5];
            // Distributions must differ in law; re-deal collisions onto unused entries.
            std::set<std::vector<int>> used;
            std::size_t next_free = 0;
            for (int d = 0; d < M; ++d) {
                auto& sub = plan.distributions[static_cast<std::size_t>(d)].class_subset;
                while (!used.insert(sub).second) {
                    sub = bank[next_free++ % 5];
                }
            }
            break;
        }
        case ShiftType::ConceptYgivenX: {
            if (shift.level > static_cast<int>(U))
                throw ConfigError("swapping pool larger than the class universe");
            std::set<std::pair<std::vector<int>, std::vector<int>>> seen;
            for (int d = 0; d < M; ++d) {
                auto& dist = plan.distributions[static_cast<std::size_t>(d)];
                for (int attempt = 0; attempt < 64; ++attempt) {
                    dist.pool = sorted_subset(U, static_cast<std::size_t>(shift.level), rng);
                    dist.pool_perm = dist.pool;
                    if (dist.pool.size() > 1) {
                        // Uniform non-identity permutation of the pool.
                        do {
                            rng.shuffle(dist.pool_perm);
                        } while (dist.pool_perm == dist.pool);
                    }
                    if (seen.insert({dist.pool, dist.pool_perm}).second) break;
                }
            }
            break;
        }
        case ShiftType::ConceptXgivenY: {
            if (shift.level > static_cast<int>(U))
                throw ConfigError("augmented class set larger than the class universe");
            std::vector<int> aug = sorted_subset(U, static_cast<std::size_t>(shift.level), rng);
            static const double angles[4] = {0.0, 90.0, 180.0, 270.0};
            std::uint64_t start = rng.next_index(4);
            for (int d = 0; d < M; ++d) {
                auto& dist = plan.distributions[static_cast<std::size_t>(d)];
                dist.augmented_classes = aug;
                dist.aug_rotation_deg = angles[(start + static_cast<std::uint64_t>(d)) % 4];
            }
            break;
        }
    }
    return plan;
}

namespace {

ClientDataset sample_client(const FederationPlan& plan, const SyntheticParams& params,
                            int client_id, int dist_id, std::uint64_t seed, bool is_test) {
    const std::size_t s = params.samples_per_client;
    const std::size_t z = plan.feature_dim;
    const std::size_t U = plan.num_classes;
    if (s < 5) throw ConfigError("samples_per_client must be >= 5 for an 80/20 split");
    const DistributionParams& dist = plan.distributions[static_cast<std::size_t>(dist_id)];

    RngStream rng = derive_stream(seed, stream_tag::kDataBase,
                                  static_cast<std::uint64_t>(client_id));
    ClientDataset c;
    c.client_id = client_id;
    c.distribution_id = dist_id;
    c.is_test = is_test;
    c.features = Matrix(s, z);
    c.labels.resize(s);
    c.train_count = (4 * s) / 5;

    const bool label_subset = plan.shift.type == ShiftType::LabelShift;
    for (std::size_t i = 0; i < s; ++i) {
        int y = label_subset
                    ? dist.class_subset[rng.next_index(dist.class_subset.size())]
                    : static_cast<int>(rng.next_index(U));
        c.labels[i] = y;
        double* row = c.features.row(i);
        const double* mean = plan.class_means.row(static_cast<std::size_t>(y));
        for (std::size_t j = 0; j < z; ++j) row[j] = mean[j] + rng.next_gaussian();
    }

    switch (plan.shift.type) {
        case ShiftType::FeatureShift:
            for (std::size_t i = 0; i < s; ++i) {
                double* row = c.features.row(i);
                rotate01(row, dist.rotation_deg);
                for (std::size_t j = 0; j < z; ++j) row[j] += dist.offset[j];
            }
            break;
        case ShiftType::LabelShift:
            break;  // already drawn from the subset
        case ShiftType::ConceptYgivenX:
            for (std::size_t i = 0; i < s; ++i) {
                for (std::size_t p = 0; p < dist.pool.size(); ++p) {
                    if (c.labels[i] == dist.pool[p]) {
                        c.labels[i] = dist.pool_perm[p];
                        break;
                    }
                }
            }
            break;
        case ShiftType::ConceptXgivenY:
            for (std::size_t i = 0; i < s; ++i) {
                bool hit = std::binary_search(dist.augmented_classes.begin(),
                                              dist.augmented_classes.end(), c.labels[i]);
                if (hit) rotate01(c.features.row(i), dist.aug_rotation_deg);
            }
            break;
    }
    return c;
}

}  // namespace

std::vector<ClientDataset> gen_synthetic_federation(std::size_t num_clients,
                                                    const SyntheticParams& params,
                                                    const ShiftSpec& shift, std::uint64_t seed) {
    const int M = shift.num_distributions;
    if (num_clients < static_cast<std::size_t>(M))
        throw ConfigError("need at least one client per distribution");
    FederationPlan plan = build_plan(params, shift, seed);

    std::vector<int> assign(num_clients);
    for (std::size_t k = 0; k < num_clients; ++k) assign[k] = static_cast<int>(k % M);
    RngStream arng = derive_stream(seed, stream_tag::kDataPlan, 1);
    arng.shuffle(assign);

    std::vector<ClientDataset> out;
    out.reserve(num_clients);
    for (std::size_t k = 0; k < num_clients; ++k)
        out.push_back(sample_client(plan, params, static_cast<int>(k), assign[k], seed, false));
    return out;
}

std::vector<ClientDataset> gen_test_clients(const FederationPlan& plan,
                                            const SyntheticParams& params,
                                            std::size_t per_distribution, int first_id,
                                            std::uint64_t seed) {
    std::vector<ClientDataset> out;
    const int M = plan.shift.num_distributions;
    out.reserve(per_distribution * static_cast<std::size_t>(M));
    int id = first_id;
    for (int d = 0; d < M; ++d)
        for (std::size_t t = 0; t < per_distribution; ++t)
            out.push_back(sample_client(plan, params, id++, d, seed, true));
    return out;
}

}  // namespace fluxfed
