#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "prime/model.hpp"
#include "prime/tensor.hpp"

namespace prime {

// Singular values at or below this are treated as numerically dead when
// computing effective rank.
constexpr double kSigmaFilter = 1e-5;

// Effective rank of a weight matrix: exp of the Shannon entropy (natural
// log) of the L1-normalized singular-value distribution, after dropping
// values <= kSigmaFilter.  Throws DegenerateMatrixError when nothing
// survives the filter.
double effective_rank(const Tensor& w);

// Effective rank together with the plain rank (count of retained singular
// values); one decomposition serves both.
struct SpectrumSummary {
    double effective_rank = 0.0;
    std::size_t rank = 0;
};

SpectrumSummary weight_spectrum(const Tensor& w);

// Normalized activation entropy E_s = H / n^alpha.  `activations` is a
// (batch x neurons) trace; each neuron is summarized by its L-infinity norm
// over the batch, the norms are histogrammed into `bins` equal-width bins
// over [0, max], and H is the base-2 Shannon entropy over non-empty bins.
// A fully silent layer scores 0.
double entropy_efficiency(const Tensor& activations, std::size_t bins, double alpha);

struct PlasticityConfig {
    double omega1 = 0.8;
    double omega2 = 0.2;
    double trigger = 0.87;
    std::size_t bins = 16;
    double alpha = 0.30;
    // Default probes the first hidden layer; random selection (seeded) is
    // available for sensitivity runs but makes thresholds noisier.
    bool random_layer = false;
    std::uint64_t layer_seed = 0;
};

struct PlasticityReport {
    std::size_t layer = 0;  // hidden layer probed
    double pr1 = 0.0;       // effective rank / neuron count
    double pr2 = 0.0;       // entropy efficiency
    double indicator = 0.0; // omega1*pr1 + omega2*pr2
    bool limited = false;   // indicator >= trigger
    double effective_rank = 0.0;
    std::size_t matrix_rank = 0;  // retained singular values
    std::size_t n = 0;            // neurons in the probed layer
};

// Probes one shared-stack layer on a forward pass of `probe_batch` (eval
// mode, dropout off) and combines both indicators.
PlasticityReport evaluate_plasticity(const Model& m, const Tensor& probe_batch,
                                     const PlasticityConfig& cfg);

struct ExpansionConfig {
    std::vector<double> allowed_factors = {1.25, 1.5, 2.0};
    double safe_threshold = 0.80;  // target ceiling for predicted pr1
    double eps0 = 1e-2;
};

struct ExpansionPlan {
    std::vector<std::size_t> layers;  // every shared hidden layer, bottom-up
    double factor = 1.0;
    double eps0 = 0.0;
    double predicted_pr1 = 0.0;
    // Set when even the largest allowed factor misses the safe threshold;
    // the plan then carries that largest factor.
    bool saturated = false;
};

// Picks the smallest allowed factor whose predicted post-expansion
// pr1 = (R_e + min((r-1)*n, n-R)) / (r*n) lands below the safe threshold.
// The plan covers all `hidden_layers` of the shared stack.
ExpansionPlan plan_expansion(const PlasticityReport& report, const ExpansionConfig& cfg,
                             std::size_t hidden_layers);

}  // namespace prime
