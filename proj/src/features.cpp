#include "prime/features.hpp"

#include <algorithm>

#include "prime/errors.hpp"

namespace prime {

FeatureVector extract_features(const FlowRecord& flow, std::size_t n_b, std::size_t n_p,
                               const Normalizers& norms) {
    if (n_b == 0 || n_p == 0) throw ConfigError({"n_b and n_p must be positive"});

    FeatureVector out;
    out.x.assign(feature_width(n_b, n_p), 0.0);

    const std::size_t pay = std::min(n_b, flow.payload_prefix.size());
    for (std::size_t i = 0; i < pay; ++i)
        out.x[i] = static_cast<double>(flow.payload_prefix[i]) / 255.0;

    const std::size_t rows = std::min(n_p, flow.packets.size());
    for (std::size_t i = 0; i < rows; ++i) {
        const PacketSummary& p = flow.packets[i];
        double* row = out.x.data() + n_b + i * kHeaderFeaturesPerPacket;
        row[0] = static_cast<double>(p.payload_len) / norms.payload_len_div;
        row[1] = static_cast<double>(p.tcp_window) / norms.window_div;
        const double iat = i == 0 ? 0.0 : p.ts - flow.packets[i - 1].ts;
        row[2] = std::clamp(iat, 0.0, norms.iat_clamp_s) / norms.iat_clamp_s;
        row[3] = static_cast<double>(p.direction);
    }
    return out;
}

}  // namespace prime
