#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <vector>

namespace prime {

// One IPv4 TCP/UDP packet as pulled from a capture file.
struct RawPacket {
    double ts = 0.0;  // seconds since the epoch
    std::uint32_t src_ip = 0, dst_ip = 0;
    std::uint16_t src_port = 0, dst_port = 0;
    std::uint8_t protocol = 0;       // 6 = TCP, 17 = UDP
    std::uint16_t tcp_window = 0;    // 0 for UDP
    std::vector<std::uint8_t> payload;  // captured transport payload bytes
};

struct PcapStats {
    std::uint64_t packets = 0;        // records read from the file
    std::uint64_t non_ip = 0;         // frames without an IPv4 layer
    std::uint64_t non_transport = 0;  // IPv4 but not decodable TCP/UDP
};

// Streaming classic-pcap reader.  Accepts microsecond and nanosecond magics
// in either byte order; pcapng and anything else is rejected up front.
// Supported link types: Ethernet (with one optional VLAN tag) and raw IP.
class PcapReader {
public:
    explicit PcapReader(std::istream& in);

    // Next TCP/UDP packet, or nullopt at clean end of file.  Skipped frames
    // are counted, truncated records throw ParseError with the byte offset.
    std::optional<RawPacket> next();

    const PcapStats& stats() const { return stats_; }

private:
    std::istream& in_;
    PcapStats stats_;
    bool swap_ = false;
    bool nanos_ = false;
    std::uint32_t linktype_ = 0;
    std::size_t offset_ = 0;  // bytes consumed, for error reporting
};

}  // namespace prime
