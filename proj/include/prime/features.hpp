#pragma once

#include <cstddef>
#include <vector>

#include "prime/flows.hpp"

namespace prime {

// Header-feature normalization constants; recorded in every dataset header
// so downstream consumers can reconstruct raw values.
struct Normalizers {
    double payload_len_div = 1460.0;
    double window_div = 65535.0;
    double iat_clamp_s = 10.0;  // inter-arrival clamped to [0, 10 s], then / 10

    bool operator==(const Normalizers&) const = default;
};

struct FeatureVector {
    std::vector<double> x;  // n_b payload features then n_p rows of 4
    int label = -1;

    std::size_t size() const { return x.size(); }
};

constexpr std::size_t kHeaderFeaturesPerPacket = 4;

inline std::size_t feature_width(std::size_t n_b, std::size_t n_p) {
    return n_b + kHeaderFeaturesPerPacket * n_p;
}

// x_pay: first n_b payload-prefix bytes / 255, zero-padded.
// x_hdr rows: (payload_len / 1460, tcp_window / 65535, clamped inter-arrival
// / 10, direction) for the first n_p packets, zero rows beyond the flow.
// The first packet's inter-arrival time is 0.
FeatureVector extract_features(const FlowRecord& flow, std::size_t n_b, std::size_t n_p,
                               const Normalizers& norms);

}  // namespace prime
