#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "fluxfed/datagen.hpp"
#include "fluxfed/descriptor.hpp"
#include "fluxfed/mlp.hpp"

namespace fluxfed {

enum class Mode { FedAvg, Flux, FluxPrior };

Mode mode_from_string(const std::string& s);
std::string to_string(Mode m);

// Everything that defines a run's outputs. Runtime knobs that must not change
// results (thread count, log level) deliberately live outside this struct so
// the config hash — and therefore run ids and logs — are invariant to them.
struct ExperimentConfig {
    std::uint64_t seed = 42;
    std::size_t num_clients = 12;
    std::size_t num_classes = 6;
    std::size_t feature_dim = 256;
    std::size_t samples_per_client = 600;
    double blob_spacing = 3.0;
    double offset_scale = 4.0;

    std::size_t latent_dim = 64;     // hidden width, doubles as latent size
    std::size_t descriptor_dim = 10; // l, projected coordinates per block
    std::size_t pca_box_samples = 200;

    int rounds = 10;
    TrainOptions train;
    double participation_rate = 1.0;
    double trigger_threshold = 0.06;
    double dbscan_scale = 1.0;
    Mode mode = Mode::Flux;
    ShiftSpec shift;
    std::optional<double> dp_epsilon;
    std::size_t test_per_distribution = 2;
    DescriptorOptions descriptor;

    SyntheticParams synthetic() const {
        return {num_classes, feature_dim, samples_per_client, blob_spacing, offset_scale};
    }
    // Shared descriptor length L under the active ablation switches.
    std::size_t descriptor_length() const {
        std::size_t per_block = descriptor.include_sigma ? 2 * descriptor_dim : descriptor_dim;
        return per_block * (descriptor.include_class_blocks ? 1 + num_classes : 1);
    }
    std::size_t model_param_count() const {
        return latent_dim * feature_dim + latent_dim + num_classes * latent_dim + num_classes;
    }
};

// Throws ConfigError naming the offending field.
void validate_config(const ExperimentConfig& cfg);

// JSON round-trip. Unknown keys are rejected (typos must not silently pass).
ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
std::string config_to_json_text(const ExperimentConfig& cfg);

// FNV-1a over the canonical (key-sorted) JSON serialization: stable across
// key order in the input file, processes, and platforms.
std::uint64_t config_hash(const ExperimentConfig& cfg);

// "<shift>-L<level>-<mode>-s<seed>-<hash8>": deterministic, collision-safe
// enough for sweep directories.
std::string run_id(const ExperimentConfig& cfg);

}  // namespace fluxfed
