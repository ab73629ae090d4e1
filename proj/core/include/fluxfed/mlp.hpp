#pragma once

#include <cstdint>
#include <vector>

#include "fluxfed/matrix.hpp"
#include "fluxfed/rng.hpp"

namespace fluxfed {

using ParamVector = std::vector<double>;

// Contiguous row range [begin, begin+count) of a feature matrix plus labels.
struct DataView {
    const Matrix* x = nullptr;
    const std::vector<int>* y = nullptr;
    std::size_t begin = 0;
    std::size_t count = 0;
};

// One-hidden-layer classifier: input -> ReLU(v) -> logits(U). The post-activation
// hidden vector doubles as the latent representation consumed downstream.
// All math in double; parameter order [W1, b1, W2, b2], W row-major.
class MlpModel {
public:
    MlpModel() = default;
    MlpModel(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes);

    std::size_t input_dim() const { return z_; }
    std::size_t latent_dim() const { return v_; }
    std::size_t num_classes() const { return u_; }
    std::size_t param_count() const { return params_.size(); }

    // Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) per layer, weights and biases.
    void init(RngStream& rng);

    const ParamVector& params() const { return params_; }
    void set_params(const ParamVector& p);

    // logits for one sample; latents (post-ReLU hidden) written if non-null.
    void forward(const double* x, double* logits, double* latents = nullptr) const;

    // Batch latents for descriptor extraction: one row per input row.
    Matrix latents(const Matrix& x) const;
    Matrix latents(const DataView& view) const;

    // Mean cross-entropy over the view. Throws NumericError if non-finite.
    double loss(const DataView& view) const;

    // Mean cross-entropy and its gradient w.r.t. every parameter.
    double loss_and_gradient(const DataView& view, ParamVector& grad) const;

    // Fraction of correct argmax predictions (ties -> lowest class id).
    double accuracy(const DataView& view) const;

    // Numerically stable softmax; each output row sums to 1.
    static void softmax_row(const double* logits, double* out, std::size_t n);

private:
    std::size_t z_ = 0, v_ = 0, u_ = 0;
    ParamVector params_;

    double* w1() { return params_.data(); }
    const double* w1() const { return params_.data(); }
    double* b1() { return params_.data() + v_ * z_; }
    const double* b1() const { return params_.data() + v_ * z_; }
    double* w2() { return params_.data() + v_ * z_ + v_; }
    const double* w2() const { return params_.data() + v_ * z_ + v_; }
    double* b2() { return params_.data() + v_ * z_ + v_ + u_ * v_; }
    const double* b2() const { return params_.data() + v_ * z_ + v_ + u_ * v_; }

    double batch_pass(const DataView& view, std::size_t lo, std::size_t hi,
                      ParamVector* grad) const;
};

struct TrainOptions {
    int epochs = 2;
    double learning_rate = 0.005;
    double momentum = 0.9;
    std::size_t batch_size = 64;
};

// Mini-batch SGD with classic momentum (buf = m*buf + g; w -= lr*buf), fresh
// momentum state per call. Index order reshuffled per epoch from `rng`;
// the final partial batch is kept. Deterministic given (params, data, rng).
void mlp_train_local(MlpModel& model, const DataView& train, const TrainOptions& opt,
                     RngStream& rng);

// Weighted arithmetic mean of parameter vectors. Rejects empty input,
// mismatched lengths, negative weights, and zero total weight.
ParamVector weighted_param_mean(const std::vector<const ParamVector*>& params,
                                const std::vector<double>& weights);

}  // namespace fluxfed
