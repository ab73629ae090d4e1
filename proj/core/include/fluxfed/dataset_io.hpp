#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fluxfed/datagen.hpp"
#include "fluxfed/dataset.hpp"

namespace fluxfed {

struct FederationMeta {
    std::uint64_t seed = 0;
    ShiftSpec shift;
    std::size_t num_classes = 0;
    std::size_t feature_dim = 0;
};

struct FederationData {
    FederationMeta meta;
    std::vector<ClientDataset> train;
    std::vector<ClientDataset> test;
};

// On-disk layout: one FLUXDS1 binary per client plus manifest.json.
// Client file: magic "FLUXDS1\0", then u32le K, U, z, s, then s labels (i32le),
// then the s*z feature matrix row-major as f64le. Split point, distribution id
// and train/test kind live in the manifest.
void save_federation(const std::string& dir, const FederationData& data);

// Validates magic, header consistency against the manifest, and exact payload
// size; malformed files raise ParseError with the offending byte offset.
FederationData load_federation(const std::string& dir);

}  // namespace fluxfed
