#include "prime/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "prime/errors.hpp"
#include "prime/rng.hpp"

namespace prime {

namespace {

std::vector<double> random_distribution(std::size_t n, Rng& rng) {
    // Log-normal weights give visibly spiky, class-distinctive distributions.
    std::vector<double> p(n);
    double sum = 0.0;
    for (double& v : p) {
        v = std::exp(rng.normal() * 2.0);
        sum += v;
    }
    for (double& v : p) v /= sum;
    return p;
}

Tensor random_transition(Rng& rng) {
    Tensor t(kSizeBuckets, kSizeBuckets);
    for (std::size_t i = 0; i < kSizeBuckets; ++i) {
        std::vector<double> row = random_distribution(kSizeBuckets, rng);
        for (std::size_t j = 0; j < kSizeBuckets; ++j) t(i, j) = row[j];
    }
    return t;
}

std::size_t sample_categorical(const std::vector<double>& p, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return i;
    }
    return p.size() - 1;
}

void blend_into(std::vector<double>& own, const std::vector<double>& shared, double s) {
    for (std::size_t i = 0; i < own.size(); ++i) own[i] = (1.0 - s) * own[i] + s * shared[i];
}

}  // namespace

std::vector<ClassProfile> make_profiles(std::size_t num_classes, double similarity,
                                        std::uint64_t seed) {
    if (num_classes < 2) throw ConfigError({"profile generation needs at least 2 classes"});
    if (similarity < 0.0 || similarity > 1.0)
        throw ConfigError({"similarity must lie in [0,1]"});

    // The shared profile every class is pulled toward.
    Rng shared_rng(derive_seed(seed, {0}));
    const Tensor shared_t = random_transition(shared_rng);
    const std::vector<double> shared_start = random_distribution(kSizeBuckets, shared_rng);
    const double shared_dir = shared_rng.uniform(0.1, 0.9);
    const double shared_rate = shared_rng.uniform(2.0, 50.0);
    const std::vector<double> shared_bytes = random_distribution(256, shared_rng);

    std::vector<ClassProfile> profiles;
    for (std::size_t c = 0; c < num_classes; ++c) {
        Rng rng(derive_seed(seed, {1, c}));
        ClassProfile p;
        p.class_id = static_cast<int>(c);
        p.payload_seed = derive_seed(seed, {2, c});

        p.transition = random_transition(rng);
        for (std::size_t i = 0; i < p.transition.size(); ++i)
            p.transition[i] = (1.0 - similarity) * p.transition[i] + similarity * shared_t[i];

        p.start = random_distribution(kSizeBuckets, rng);
        blend_into(p.start, shared_start, similarity);

        p.dir_alternate_p =
            (1.0 - similarity) * rng.uniform(0.1, 0.9) + similarity * shared_dir;
        p.iat_rate = (1.0 - similarity) * rng.uniform(2.0, 50.0) + similarity * shared_rate;

        p.byte_probs = random_distribution(256, rng);
        blend_into(p.byte_probs, shared_bytes, similarity);

        profiles.push_back(std::move(p));
    }
    return profiles;
}

Dataset sample_dataset(const std::vector<ClassProfile>& profiles, std::size_t samples_per_class,
                       std::size_t n_b, std::size_t n_p, std::uint64_t seed) {
    if (samples_per_class == 0) throw ConfigError({"samples_per_class must be positive"});

    Dataset ds;
    ds.n_b = n_b;
    ds.n_p = n_p;
    for (const ClassProfile& p : profiles)
        ds.class_names.push_back("class-" + std::to_string(p.class_id));

    for (std::size_t c = 0; c < profiles.size(); ++c) {
        const ClassProfile& prof = profiles[c];
        for (std::size_t s = 0; s < samples_per_class; ++s) {
            Rng rng(derive_seed(seed, {c, s}));

            // Simulated bi-flow: packet count varies around n_p so padding
            // and truncation both occur in the wild.
            const std::size_t count = std::max<std::size_t>(2, n_p / 2 + rng.below(n_p + 1));
            FlowRecord flow;
            double t = 0.0;
            std::size_t bucket = sample_categorical(prof.start, rng);
            std::uint8_t dir = 0;
            std::size_t total_payload = 0;
            for (std::size_t i = 0; i < count; ++i) {
                if (i > 0) {
                    t += -std::log(1.0 - rng.uniform()) / prof.iat_rate;
                    std::vector<double> row(kSizeBuckets);
                    for (std::size_t j = 0; j < kSizeBuckets; ++j) row[j] = prof.transition(bucket, j);
                    bucket = sample_categorical(row, rng);
                    if (rng.uniform() < prof.dir_alternate_p) dir ^= 1;
                }
                const double lo = kMaxPacketBytes * bucket / kSizeBuckets;
                const double hi = kMaxPacketBytes * (bucket + 1) / kSizeBuckets;
                PacketSummary pkt;
                pkt.ts = t;
                pkt.payload_len = static_cast<std::uint32_t>(rng.uniform(lo, hi));
                pkt.tcp_window = static_cast<std::uint16_t>(rng.below(65536));
                pkt.direction = dir;
                flow.packets.push_back(pkt);
                total_payload += pkt.payload_len;
            }
            const std::size_t prefix = std::min(n_b, total_payload);
            flow.payload_prefix.reserve(prefix);
            for (std::size_t i = 0; i < prefix; ++i)
                flow.payload_prefix.push_back(
                    static_cast<std::uint8_t>(sample_categorical(prof.byte_probs, rng)));

            FeatureVector fv = extract_features(flow, n_b, n_p, ds.norms);
            fv.label = prof.class_id;
            ds.samples.push_back(std::move(fv));
        }
    }
    return ds;
}

TaskStream stage_stream(const Dataset& ds, const std::vector<std::vector<int>>& stage_plan,
                        SplitFractions split, std::uint64_t seed) {
    if (stage_plan.empty()) throw ConfigError({"stage plan is empty"});
    const double total = split.train + split.val + split.test;
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError({"split fractions must sum to 1"});

    std::set<int> known;
    for (const FeatureVector& fv : ds.samples) known.insert(fv.label);
    std::set<int> seen;
    for (const auto& stage : stage_plan) {
        if (stage.empty()) throw ConfigError({"a stage introduces no classes"});
        for (int c : stage) {
            if (!known.count(c))
                throw ConfigError({"stage plan references unknown class " + std::to_string(c)});
            if (!seen.insert(c).second)
                throw ConfigError({"class " + std::to_string(c) + " appears in two stages"});
        }
    }

    // Per-class index lists in dataset order.
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        by_class[ds.samples[i].label].push_back(i);

    TaskStream ts;
    ts.width = ds.width();
    const auto rnd = [](double x) { return static_cast<long long>(std::floor(x + 0.5)); };
    for (std::size_t si = 0; si < stage_plan.size(); ++si) {
        StageData stage;
        stage.class_ids = stage_plan[si];
        // Cumulative boundary rounding: per-class counts stay within one
        // sample of exact, and so do the stage totals (per-class rounding
        // alone lets stage totals drift by one sample per class).
        long long cum = 0;
        for (int c : stage_plan[si]) {
            auto idx = by_class[c];
            Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(c)}));
            rng.shuffle(idx);

            const long long size = static_cast<long long>(idx.size());
            const long long next = cum + size;
            long long n_train = rnd(split.train * next) - rnd(split.train * cum);
            long long n_val = rnd((split.train + split.val) * next) -
                              rnd((split.train + split.val) * cum) - n_train;
            cum = next;
            n_train = std::clamp(n_train, 0LL, size);
            n_val = std::clamp(n_val, 0LL, size - n_train);
            const long long n_test = size - n_train - n_val;

            std::size_t pos = 0;
            auto take = [&](std::vector<FeatureVector>& dst, long long cnt) {
                for (long long i = 0; i < cnt; ++i) dst.push_back(ds.samples[idx[pos++]]);
            };
            take(stage.train, n_train);
            take(stage.val, n_val);
            take(stage.test, n_test);
        }
        // Interleave classes within each set deterministically.
        Rng mix(derive_seed(seed, {7, si}));
        mix.shuffle(stage.train);
        mix.shuffle(stage.val);
        mix.shuffle(stage.test);
        ts.stages.push_back(std::move(stage));
    }
    return ts;
}

}  // namespace prime
