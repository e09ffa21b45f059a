#pragma once

#include <vector>

#include "prime/tensor.hpp"

namespace prime {

Tensor softmax_rows(const Tensor& logits);

struct LossGrad {
    double loss = 0.0;
    Tensor dlogits;
};

// Mean over the batch of -log softmax(logits)[label].
LossGrad cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Both operands pass through a temperature-scaled softmax (probabilities
// raised to 1/T and renormalized); returns the cross-entropy of the model's
// tempered distribution against the tempered calibration targets, averaged
// over the batch.  Gradient is (q - p) / (T * batch).
LossGrad distillation_loss(const Tensor& logits, const Tensor& calibration, double temperature);

double accuracy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace prime
