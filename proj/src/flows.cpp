#include "prime/flows.hpp"

#include <unordered_map>

namespace prime {

FlowKey FlowKey::canonical(std::uint32_t src_ip, std::uint16_t src_port, std::uint32_t dst_ip,
                           std::uint16_t dst_port, std::uint8_t protocol) {
    FlowKey k;
    k.protocol = protocol;
    const bool src_first =
        src_ip < dst_ip || (src_ip == dst_ip && src_port <= dst_port);
    if (src_first) {
        k.addr_a = src_ip; k.port_a = src_port;
        k.addr_b = dst_ip; k.port_b = dst_port;
    } else {
        k.addr_a = dst_ip; k.port_a = dst_port;
        k.addr_b = src_ip; k.port_b = src_port;
    }
    return k;
}

std::size_t FlowKeyHash::operator()(const FlowKey& k) const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
        h ^= v;
        h *= 1099511628211ull;
    };
    mix(k.addr_a);
    mix(k.addr_b);
    mix((static_cast<std::uint64_t>(k.port_a) << 32) | k.port_b);
    mix(k.protocol);
    return static_cast<std::size_t>(h);
}

std::vector<FlowRecord> assemble_flows(const std::vector<RawPacket>& packets, double idle_timeout,
                                       std::size_t payload_prefix_cap) {
    std::vector<FlowRecord> flows;
    std::unordered_map<FlowKey, std::size_t, FlowKeyHash> active;

    for (const RawPacket& pkt : packets) {
        const FlowKey key =
            FlowKey::canonical(pkt.src_ip, pkt.src_port, pkt.dst_ip, pkt.dst_port, pkt.protocol);

        auto it = active.find(key);
        bool fresh = it == active.end();
        if (!fresh) {
            const FlowRecord& cur = flows[it->second];
            if (pkt.ts - cur.packets.back().ts > idle_timeout) fresh = true;
        }
        if (fresh) {
            FlowRecord rec;
            rec.key = key;
            rec.initiator_ip = pkt.src_ip;
            rec.initiator_port = pkt.src_port;
            flows.push_back(std::move(rec));
            active[key] = flows.size() - 1;
            it = active.find(key);
        }

        FlowRecord& rec = flows[it->second];
        PacketSummary s;
        s.ts = pkt.ts;
        s.payload_len = static_cast<std::uint32_t>(pkt.payload.size());
        s.tcp_window = pkt.tcp_window;
        s.direction =
            (pkt.src_ip == rec.initiator_ip && pkt.src_port == rec.initiator_port) ? 0 : 1;
        rec.packets.push_back(s);

        if (rec.payload_prefix.size() < payload_prefix_cap) {
            const std::size_t room = payload_prefix_cap - rec.payload_prefix.size();
            const std::size_t take = std::min(room, pkt.payload.size());
            rec.payload_prefix.insert(rec.payload_prefix.end(), pkt.payload.begin(),
                                      pkt.payload.begin() + static_cast<std::ptrdiff_t>(take));
        }
    }
    return flows;
}

}  // namespace prime
