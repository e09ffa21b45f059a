#pragma once

#include <cstdint>
#include <vector>

#include "prime/pcap.hpp"

namespace prime {

// Canonical bi-flow identity: the lexicographically smaller (addr, port)
// endpoint is stored first so both directions map to the same key.
struct FlowKey {
    std::uint32_t addr_a = 0, addr_b = 0;
    std::uint16_t port_a = 0, port_b = 0;
    std::uint8_t protocol = 0;

    static FlowKey canonical(std::uint32_t src_ip, std::uint16_t src_port, std::uint32_t dst_ip,
                             std::uint16_t dst_port, std::uint8_t protocol);

    bool operator==(const FlowKey&) const = default;
};

struct FlowKeyHash {
    std::size_t operator()(const FlowKey& k) const;
};

struct PacketSummary {
    double ts = 0.0;
    std::uint32_t payload_len = 0;
    std::uint16_t tcp_window = 0;  // 0 for UDP
    std::uint8_t direction = 0;    // 0 = initiator -> responder
};

struct FlowRecord {
    FlowKey key;
    std::uint32_t initiator_ip = 0;
    std::uint16_t initiator_port = 0;
    std::vector<PacketSummary> packets;
    // First bytes of the flow's transport payload, concatenated in arrival
    // order across packets, capped at the prefix limit given to the
    // assembler.
    std::vector<std::uint8_t> payload_prefix;
};

// Groups time-ordered packets into bi-flows.  A silence longer than
// idle_timeout on a key closes the record and a later packet on the same
// key opens a fresh one.  Flows are returned in order of first appearance.
std::vector<FlowRecord> assemble_flows(const std::vector<RawPacket>& packets, double idle_timeout,
                                       std::size_t payload_prefix_cap);

}  // namespace prime
