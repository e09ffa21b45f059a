#pragma once

#include <cstdint>
#include <vector>

#include "prime/dataset.hpp"
#include "prime/tensor.hpp"

namespace prime {

// Generative description of one traffic class: a Markov chain over packet
// size buckets, a direction-alternation probability, an exponential
// inter-arrival rate, and a byte distribution for payload content.
struct ClassProfile {
    int class_id = 0;
    Tensor transition;             // 8x8, rows sum to 1
    std::vector<double> start;     // initial bucket distribution
    double dir_alternate_p = 0.5;  // chance each packet flips direction
    double iat_rate = 10.0;        // exponential rate, packets per second
    std::uint64_t payload_seed = 0;
    std::vector<double> byte_probs;  // 256 entries, sums to 1
};

constexpr std::size_t kSizeBuckets = 8;
constexpr double kMaxPacketBytes = 1460.0;

// similarity 0 draws every class independently; similarity 1 makes all
// classes share one profile; intermediate values interpolate transition
// matrices, rates, and byte distributions toward the shared profile.
std::vector<ClassProfile> make_profiles(std::size_t num_classes, double similarity,
                                        std::uint64_t seed);

// Simulates flows per class and routes them through extract_features so the
// output is format-identical to pcap-derived data.
Dataset sample_dataset(const std::vector<ClassProfile>& profiles, std::size_t samples_per_class,
                       std::size_t n_b, std::size_t n_p, std::uint64_t seed);

struct StageData {
    std::vector<int> class_ids;  // classes introduced at this stage
    std::vector<FeatureVector> train, val, test;
};

struct TaskStream {
    std::vector<StageData> stages;
    std::size_t width = 0;
};

struct SplitFractions {
    double train = 0.75, val = 0.10, test = 0.15;
};

// Stratified per-class split with cumulative boundary rounding: every class's
// set sizes and every stage's totals land within one sample of the exact
// fractions.  Shuffled by seed.
TaskStream stage_stream(const Dataset& ds, const std::vector<std::vector<int>>& stage_plan,
                        SplitFractions split, std::uint64_t seed);

}  // namespace prime
