#pragma once

#include <cstddef>
#include <vector>

namespace fluxfed {

// Row-major dense matrix of doubles. Deliberately minimal: the simulator needs
// deterministic arithmetic more than it needs a linear-algebra zoo.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }
};

}  // namespace fluxfed
