#include "prime/plasticity.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "prime/errors.hpp"
#include "prime/rng.hpp"

namespace prime {

namespace {

std::vector<double> retained_singular_values(const Tensor& w) {
    if (w.rows() == 0 || w.cols() == 0) throw ShapeError("cannot decompose an empty matrix");

    Eigen::MatrixXd m(w.rows(), w.cols());
    for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t j = 0; j < w.cols(); ++j) m(static_cast<Eigen::Index>(i),
                                                     static_cast<Eigen::Index>(j)) = w(i, j);

    Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
    std::vector<double> kept;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
        const double s = svd.singularValues()(i);
        if (s > kSigmaFilter) kept.push_back(s);
    }
    if (kept.empty())
        throw DegenerateMatrixError("no singular value above " + std::to_string(kSigmaFilter));
    return kept;
}

}  // namespace

SpectrumSummary weight_spectrum(const Tensor& w) {
    const std::vector<double> sv = retained_singular_values(w);
    double total = 0.0;
    for (double s : sv) total += s;
    double h = 0.0;
    for (double s : sv) {
        const double p = s / total;
        h -= p * std::log(p);
    }
    SpectrumSummary out;
    out.effective_rank = std::exp(h);
    out.rank = sv.size();
    return out;
}

double effective_rank(const Tensor& w) { return weight_spectrum(w).effective_rank; }

double entropy_efficiency(const Tensor& activations, std::size_t bins, double alpha) {
    if (bins < 2) throw ConfigError({"entropy histogram needs at least 2 bins"});
    const std::size_t rows = activations.rows();
    const std::size_t n = activations.cols();
    if (rows == 0 || n == 0) throw ShapeError("empty activation trace");

    std::vector<double> norms(n, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < n; ++j)
            norms[j] = std::max(norms[j], std::abs(activations(i, j)));

    const double top = *std::max_element(norms.begin(), norms.end());
    if (top == 0.0) return 0.0;  // silent layer

    std::vector<std::size_t> counts(bins, 0);
    for (double v : norms) {
        auto b = static_cast<std::size_t>(v / top * static_cast<double>(bins));
        ++counts[std::min(b, bins - 1)];
    }
    double h = 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(n);
        h -= p * std::log2(p);
    }
    return h / std::pow(static_cast<double>(n), alpha);
}

PlasticityReport evaluate_plasticity(const Model& m, const Tensor& probe_batch,
                                     const PlasticityConfig& cfg) {
    if (m.hidden.empty()) throw ConfigError({"model has no shared hidden layer to probe"});

    std::size_t layer = 0;
    if (cfg.random_layer) {
        Rng rng(cfg.layer_seed);
        layer = rng.below(m.hidden.size());
    }

    const ForwardTrace trace = forward(m, probe_batch, false, 0);

    PlasticityReport rep;
    rep.layer = layer;
    rep.n = m.hidden[layer].out_dim();
    const SpectrumSummary spec = weight_spectrum(m.hidden[layer].w);
    rep.effective_rank = spec.effective_rank;
    rep.matrix_rank = spec.rank;
    rep.pr1 = spec.effective_rank / static_cast<double>(rep.n);
    rep.pr2 = entropy_efficiency(trace.post[layer], cfg.bins, cfg.alpha);
    rep.indicator = cfg.omega1 * rep.pr1 + cfg.omega2 * rep.pr2;
    rep.limited = rep.indicator >= cfg.trigger;
    return rep;
}

ExpansionPlan plan_expansion(const PlasticityReport& report, const ExpansionConfig& cfg,
                             std::size_t hidden_layers) {
    if (!report.limited)
        throw ConfigError({"expansion planned for a layer that is not plasticity-limited"});
    if (cfg.allowed_factors.empty()) throw ConfigError({"no expansion factors allowed"});
    if (hidden_layers == 0) throw ConfigError({"no hidden layers to expand"});

    std::vector<double> factors = cfg.allowed_factors;
    std::sort(factors.begin(), factors.end());
    if (factors.front() <= 1.0) throw ConfigError({"expansion factors must exceed 1"});

    const double n = static_cast<double>(report.n);
    const double spare = n - static_cast<double>(report.matrix_rank);
    const auto predict = [&](double r) {
        const double delta_r = std::min((r - 1.0) * n, spare);
        return (report.effective_rank + delta_r) / (r * n);
    };

    ExpansionPlan plan;
    for (std::size_t l = 0; l < hidden_layers; ++l) plan.layers.push_back(l);
    plan.eps0 = cfg.eps0;
    plan.factor = factors.back();
    plan.predicted_pr1 = predict(factors.back());
    plan.saturated = true;
    for (double r : factors) {
        if (predict(r) < cfg.safe_threshold) {
            plan.factor = r;
            plan.predicted_pr1 = predict(r);
            plan.saturated = false;
            break;
        }
    }
    return plan;
}

}  // namespace prime
