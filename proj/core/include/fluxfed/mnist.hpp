#pragma once

#include <string>
#include <vector>

#include "fluxfed/matrix.hpp"

namespace fluxfed {

struct MnistData {
    Matrix features;          // n x 784, pixel values scaled to [0, 1]
    std::vector<int> labels;  // n, in [0, 9]
};

// IDX readers (big-endian headers, magics 0x00000803 / 0x00000801). Malformed
// input raises ParseError carrying the byte offset of the violation. `limit`
// caps the number of examples loaded (0 = all).
MnistData load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                         std::size_t limit = 0);

// Right-angle rotation of every 28x28 row as an exact pixel permutation.
// degrees must be one of {0, 90, 180, 270}; 90 maps pixel (0,0) to (0,27).
Matrix apply_rotation_to_images(const Matrix& images, int degrees);

}  // namespace fluxfed
