#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "prime/dataset.hpp"
#include "prime/pcap.hpp"

namespace prime {

// One 5-tuple labeling rule.  Unset selectors match anything; port and addr
// match either endpoint of the canonical bi-flow, so a rule written for the
// server side also catches the client side of the same conversation.
struct TupleRule {
    std::optional<std::string> protocol;  // "tcp" or "udp"
    std::optional<std::uint16_t> port;
    std::optional<std::uint32_t> addr;  // IPv4, host-order quad
    std::string label;
};

// Labeling manifest: capture files can be labeled wholesale by basename,
// individual flows by tuple rules.  A flow matched by several sources must
// get one consistent label; disagreement is an error naming the flow.
struct LabelManifest {
    std::vector<std::string> classes;  // optional explicit label order
    std::vector<std::pair<std::string, std::string>> files;  // basename -> label
    std::vector<TupleRule> tuples;
};

// Strict JSON manifest parse: unknown keys anywhere are rejected and every
// problem is reported in one ConfigError.
LabelManifest parse_manifest(const std::string& json_text);
LabelManifest load_manifest(const std::string& path);

// "a.b.c.d" -> host-order quad; throws Error on anything else.
std::uint32_t parse_ipv4(const std::string& text);
std::string format_ipv4(std::uint32_t addr);

struct IngestStats {
    std::uint64_t flows_seen = 0;
    std::uint64_t labeled = 0;
    std::uint64_t unlabeled = 0;  // counted here, excluded from the dataset
    PcapStats pcap;               // frame-level skip counters, summed over files
};

struct IngestResult {
    Dataset dataset;
    IngestStats stats;
};

struct IngestOptions {
    std::size_t n_b = 784;
    std::size_t n_p = 32;
    Normalizers norms;
    double idle_timeout = 60.0;
};

// Reads every capture, assembles bi-flows per file, labels them through the
// manifest, and extracts features for the labeled ones.  The output dataset
// is format-identical to the synthetic generator's.  Class order follows
// manifest.classes when given (labels outside that list are an error);
// otherwise it is the sorted set of labels the manifest mentions.
IngestResult ingest_pcaps(const std::vector<std::string>& paths, const LabelManifest& manifest,
                          const IngestOptions& opt);

}  // namespace prime
