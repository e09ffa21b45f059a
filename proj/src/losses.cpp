#include "prime/losses.hpp"

#include <cmath>

#include "prime/errors.hpp"

namespace prime {

namespace {

// Row-wise log-sum-exp, stabilized.
double log_sum_exp(const double* row, std::size_t n) {
    double mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(row[j] - mx);
    return mx + std::log(s);
}

}  // namespace

Tensor softmax_rows(const Tensor& logits) {
    Tensor p = logits;
    const std::size_t rows = p.rows(), cols = p.cols();
    for (std::size_t i = 0; i < rows; ++i) {
        double* row = p.data() + i * cols;
        const double lse = log_sum_exp(row, cols);
        for (std::size_t j = 0; j < cols; ++j) row[j] = std::exp(row[j] - lse);
    }
    return p;
}

LossGrad cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    const std::size_t batch = logits.rows(), classes = logits.cols();
    if (labels.size() != batch)
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                         std::to_string(batch));
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= classes)
            throw Error("cross_entropy: label " + std::to_string(y) + " outside [0," +
                        std::to_string(classes) + ")");

    LossGrad out;
    out.dlogits = softmax_rows(logits);
    const double inv_b = 1.0 / static_cast<double>(batch);
    double loss = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        const double p = out.dlogits(i, y);
        loss -= std::log(std::max(p, 1e-300));
        for (std::size_t j = 0; j < classes; ++j) out.dlogits(i, j) *= inv_b;
        out.dlogits(i, y) -= inv_b;
    }
    out.loss = loss * inv_b;
    return out;
}

LossGrad distillation_loss(const Tensor& logits, const Tensor& calibration, double temperature) {
    if (temperature <= 0.0) throw ConfigError({"distillation temperature must be positive"});
    if (!logits.same_shape(calibration))
        throw ShapeError("distillation_loss: logits " + logits.shape_str() + " vs calibration " +
                         calibration.shape_str());

    const std::size_t batch = logits.rows(), classes = logits.cols();
    Tensor scaled_q = logits, scaled_p = calibration;
    scale_inplace(scaled_q, 1.0 / temperature);
    scale_inplace(scaled_p, 1.0 / temperature);
    Tensor q = softmax_rows(scaled_q);
    const Tensor p = softmax_rows(scaled_p);

    LossGrad out;
    const double inv_b = 1.0 / static_cast<double>(batch);
    double loss = 0.0;
    for (std::size_t i = 0; i < batch; ++i)
        for (std::size_t j = 0; j < classes; ++j)
            loss -= p(i, j) * std::log(std::max(q(i, j), 1e-300));
    out.loss = loss * inv_b;

    // d/dz of -sum_j p_j log softmax(z/T)_j is (q - p)/T.
    out.dlogits = std::move(q);
    const double k = inv_b / temperature;
    for (std::size_t i = 0; i < out.dlogits.size(); ++i)
        out.dlogits[i] = (out.dlogits[i] - p[i]) * k;
    return out;
}

double accuracy(const Tensor& logits, const std::vector<int>& labels) {
    const std::size_t batch = logits.rows(), classes = logits.cols();
    if (labels.size() != batch) throw ShapeError("accuracy: label count mismatch");
    if (batch == 0) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < batch; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < classes; ++j)
            if (logits(i, j) > logits(i, best)) best = j;
        if (static_cast<int>(best) == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(batch);
}

}  // namespace prime
