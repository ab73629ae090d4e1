#pragma once

#include <vector>

#include "fluxfed/matrix.hpp"
#include "fluxfed/mlp.hpp"

namespace fluxfed {

// One client's local shard. First train_count rows are the training split,
// the remainder is the validation split (80/20, train_count = 4s/5).
struct ClientDataset {
    int client_id = 0;
    Matrix features;
    std::vector<int> labels;
    std::size_t train_count = 0;
    int distribution_id = 0;  // ground-truth generator id, evaluation only
    bool is_test = false;     // test clients keep labels on disk but share none

    std::size_t samples() const { return features.rows; }

    DataView train_view() const { return {&features, &labels, 0, train_count}; }
    DataView val_view() const {
        return {&features, &labels, train_count, features.rows - train_count};
    }
    DataView full_view() const { return {&features, &labels, 0, features.rows}; }
};

}  // namespace fluxfed
