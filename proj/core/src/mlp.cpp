#include "fluxfed/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fluxfed/errors.hpp"

namespace fluxfed {

MlpModel::MlpModel(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes)
    : z_(input_dim), v_(hidden_dim), u_(num_classes),
      params_(hidden_dim * input_dim + hidden_dim + num_classes * hidden_dim + num_classes, 0.0) {
    if (input_dim == 0 || hidden_dim == 0 || num_classes < 2)
        throw ConfigError("mlp dimensions must be positive with at least 2 classes");
}

void MlpModel::init(RngStream& rng) {
    auto fill = [&rng](double* p, std::size_t n, double bound) {
        for (std::size_t i = 0; i < n; ++i) p[i] = (2.0 * rng.next_real() - 1.0) * bound;
    };
    double bound1 = 1.0 / std::sqrt(static_cast<double>(z_));
    double bound2 = 1.0 / std::sqrt(static_cast<double>(v_));
    fill(w1(), v_ * z_, bound1);
    fill(b1(), v_, bound1);
    fill(w2(), u_ * v_, bound2);
    fill(b2(), u_, bound2);
}

void MlpModel::set_params(const ParamVector& p) {
    if (p.size() != params_.size()) throw ConfigError("parameter vector length mismatch");
    params_ = p;
}

void MlpModel::forward(const double* x, double* logits, double* latents) const {
    std::vector<double> h(v_);
    const double* W1 = w1();
    const double* B1 = b1();
    for (std::size_t j = 0; j < v_; ++j) {
        const double* wr = W1 + j * z_;
        double acc = B1[j];
        for (std::size_t k = 0; k < z_; ++k) acc += wr[k] * x[k];
        h[j] = acc > 0.0 ? acc : 0.0;
    }
    const double* W2 = w2();
    const double* B2 = b2();
    for (std::size_t u = 0; u < u_; ++u) {
        const double* wr = W2 + u * v_;
        double acc = B2[u];
        for (std::size_t j = 0; j < v_; ++j) acc += wr[j] * h[j];
        logits[u] = acc;
    }
    if (latents) std::copy(h.begin(), h.end(), latents);
}

Matrix MlpModel::latents(const Matrix& x) const {
    DataView v{&x, nullptr, 0, x.rows};
    return latents(v);
}

Matrix MlpModel::latents(const DataView& view) const {
    if (view.x->cols != z_) throw ConfigError("feature dimension does not match model input");
    Matrix out(view.count, v_);
    std::vector<double> logits(u_);
    for (std::size_t i = 0; i < view.count; ++i)
        forward(view.x->row(view.begin + i), logits.data(), out.row(i));
    return out;
}

void MlpModel::softmax_row(const double* logits, double* out, std::size_t n) {
    double mx = logits[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= sum;
}

// Forward + (optionally) backward over rows [lo, hi) of the view.
// Returns summed cross-entropy; gradient contributions are accumulated raw
// (caller divides both by the batch size).
double MlpModel::batch_pass(const DataView& view, std::size_t lo, std::size_t hi,
                            ParamVector* grad) const {
    const Matrix& X = *view.x;
    const std::vector<int>& Y = *view.y;
    const double* W1 = w1();
    const double* B1 = b1();
    const double* W2 = w2();
    const double* B2 = b2();

    double loss_sum = 0.0;
    std::vector<double> h(v_), logits(u_), prob(u_), dh(v_);
    double* gW1 = grad ? grad->data() : nullptr;
    double* gB1 = grad ? grad->data() + v_ * z_ : nullptr;
    double* gW2 = grad ? grad->data() + v_ * z_ + v_ : nullptr;
    double* gB2 = grad ? grad->data() + v_ * z_ + v_ + u_ * v_ : nullptr;

    for (std::size_t i = lo; i < hi; ++i) {
        const double* x = X.row(view.begin + i);
        int label = Y[view.begin + i];
        if (label < 0 || static_cast<std::size_t>(label) >= u_)
            throw ConfigError("label outside [0, num_classes)");
        for (std::size_t j = 0; j < v_; ++j) {
            const double* wr = W1 + j * z_;
            double acc = B1[j];
            for (std::size_t k = 0; k < z_; ++k) acc += wr[k] * x[k];
            h[j] = acc > 0.0 ? acc : 0.0;
        }
        for (std::size_t u = 0; u < u_; ++u) {
            const double* wr = W2 + u * v_;
            double acc = B2[u];
            for (std::size_t j = 0; j < v_; ++j) acc += wr[j] * h[j];
            logits[u] = acc;
        }
        double mx = *std::max_element(logits.begin(), logits.end());
        double lse = 0.0;
        for (std::size_t u = 0; u < u_; ++u) lse += std::exp(logits[u] - mx);
        lse = mx + std::log(lse);
        loss_sum += lse - logits[static_cast<std::size_t>(label)];

        if (!grad) continue;
        softmax_row(logits.data(), prob.data(), u_);
        prob[static_cast<std::size_t>(label)] -= 1.0;  // dL/dlogits
        std::fill(dh.begin(), dh.end(), 0.0);
        for (std::size_t u = 0; u < u_; ++u) {
            double d = prob[u];
            double* gw = gW2 + u * v_;
            const double* wr = W2 + u * v_;
            for (std::size_t j = 0; j < v_; ++j) {
                gw[j] += d * h[j];
                dh[j] += d * wr[j];
            }
            gB2[u] += d;
        }
        for (std::size_t j = 0; j < v_; ++j) {
            if (h[j] <= 0.0) continue;  // ReLU gate
            double d = dh[j];
            double* gw = gW1 + j * z_;
            for (std::size_t k = 0; k < z_; ++k) gw[k] += d * x[k];
            gB1[j] += d;
        }
    }
    return loss_sum;
}

double MlpModel::loss(const DataView& view) const {
    if (view.count == 0) throw ConfigError("loss over empty view");
    double total = batch_pass(view, 0, view.count, nullptr);
    double mean = total / static_cast<double>(view.count);
    if (!std::isfinite(mean)) throw NumericError("non-finite training loss");
    return mean;
}

double MlpModel::loss_and_gradient(const DataView& view, ParamVector& grad) const {
    if (view.count == 0) throw ConfigError("gradient over empty view");
    grad.assign(params_.size(), 0.0);
    double total = batch_pass(view, 0, view.count, &grad);
    double inv = 1.0 / static_cast<double>(view.count);
    for (double& g : grad) g *= inv;
    double mean = total * inv;
    if (!std::isfinite(mean)) throw NumericError("non-finite training loss");
    return mean;
}

double MlpModel::accuracy(const DataView& view) const {
    if (view.count == 0) throw ConfigError("accuracy over empty view");
    std::vector<double> logits(u_);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < view.count; ++i) {
        forward(view.x->row(view.begin + i), logits.data());
        std::size_t best = 0;
        for (std::size_t u = 1; u < u_; ++u)
            if (logits[u] > logits[best]) best = u;
        if (static_cast<int>(best) == (*view.y)[view.begin + i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(view.count);
}

void mlp_train_local(MlpModel& model, const DataView& train, const TrainOptions& opt,
                     RngStream& rng) {
    if (opt.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (opt.batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (train.count == 0) throw ConfigError("training view is empty");

    std::vector<std::size_t> order(train.count);
    std::iota(order.begin(), order.end(), 0);
    ParamVector grad(model.param_count());
    ParamVector buf(model.param_count(), 0.0);
    ParamVector params = model.params();

    // Gather rows of the current mini-batch into a dense scratch block so the
    // inner loops stay contiguous.
    Matrix bx(std::min<std::size_t>(opt.batch_size, train.count), train.x->cols);
    std::vector<int> by(bx.rows);

    for (int e = 0; e < opt.epochs; ++e) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < train.count; start += opt.batch_size) {
            std::size_t n = std::min(opt.batch_size, train.count - start);
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t src = train.begin + order[start + i];
                std::copy(train.x->row(src), train.x->row(src) + train.x->cols, bx.row(i));
                by[i] = (*train.y)[src];
            }
            DataView batch{&bx, &by, 0, n};
            model.loss_and_gradient(batch, grad);
            for (std::size_t i = 0; i < params.size(); ++i) {
                buf[i] = opt.momentum * buf[i] + grad[i];
                params[i] -= opt.learning_rate * buf[i];
            }
            model.set_params(params);
        }
    }
}

ParamVector weighted_param_mean(const std::vector<const ParamVector*>& params,
                                const std::vector<double>& weights) {
    if (params.empty()) throw ConfigError("weighted mean over empty parameter list");
    if (params.size() != weights.size())
        throw ConfigError("parameter list and weight list lengths differ");
    std::size_t n = params[0]->size();
    double total = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->size() != n) throw ConfigError("parameter vector length mismatch");
        if (weights[i] < 0.0) throw ConfigError("negative aggregation weight");
        total += weights[i];
    }
    if (total <= 0.0) throw ConfigError("zero total aggregation weight");
    ParamVector out(n, 0.0);
    for (std::size_t i = 0; i < params.size(); ++i) {
        double w = weights[i] / total;
        const ParamVector& p = *params[i];
        for (std::size_t j = 0; j < n; ++j) out[j] += w * p[j];
    }
    return out;
}

}  // namespace fluxfed
