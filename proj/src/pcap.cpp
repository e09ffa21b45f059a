#include "prime/pcap.hpp"

#include <cstring>

#include "prime/errors.hpp"

namespace prime {

namespace {

constexpr std::uint32_t kMagicMicro = 0xA1B2C3D4;
constexpr std::uint32_t kMagicMicroSwapped = 0xD4C3B2A1;
constexpr std::uint32_t kMagicNano = 0xA1B23C4D;
constexpr std::uint32_t kMagicNanoSwapped = 0x4D3CB2A1;
constexpr std::uint32_t kMagicPcapng = 0x0A0D0D0A;

constexpr std::uint32_t kLinkEthernet = 1;
constexpr std::uint32_t kLinkRawIp = 101;

std::uint32_t bswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xFF00u) | ((v << 8) & 0xFF0000u) | (v << 24);
}

std::uint16_t be16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

std::uint32_t be32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

}  // namespace

PcapReader::PcapReader(std::istream& in) : in_(in) {
    std::uint8_t hdr[24];
    in_.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
    if (in_.gcount() < 4) throw ParseError(0, "file shorter than a pcap magic number");

    std::uint32_t magic;
    std::memcpy(&magic, hdr, 4);
    if (magic == kMagicPcapng)
        throw UnsupportedFormatError("pcapng capture (only classic pcap is supported)");
    switch (magic) {
        case kMagicMicro: break;
        case kMagicNano: nanos_ = true; break;
        case kMagicMicroSwapped: swap_ = true; break;
        case kMagicNanoSwapped: swap_ = true; nanos_ = true; break;
        default:
            throw UnsupportedFormatError("unknown capture magic");
    }
    if (in_.gcount() != sizeof(hdr)) throw ParseError(4, "truncated pcap global header");

    std::uint32_t link;
    std::memcpy(&link, hdr + 20, 4);
    linktype_ = swap_ ? bswap32(link) : link;
    if (linktype_ != kLinkEthernet && linktype_ != kLinkRawIp)
        throw UnsupportedFormatError("pcap link type " + std::to_string(linktype_));
    offset_ = sizeof(hdr);
}

std::optional<RawPacket> PcapReader::next() {
    for (;;) {
        std::uint8_t rec[16];
        in_.read(reinterpret_cast<char*>(rec), sizeof(rec));
        const std::streamsize got = in_.gcount();
        if (got == 0) return std::nullopt;  // clean end of file
        if (got < static_cast<std::streamsize>(sizeof(rec)))
            throw ParseError(offset_, "truncated packet record header");

        std::uint32_t f[4];
        std::memcpy(f, rec, sizeof(rec));
        if (swap_)
            for (std::uint32_t& v : f) v = bswap32(v);
        const std::uint32_t ts_sec = f[0], ts_sub = f[1], incl = f[2];

        if (incl > (1u << 26)) throw ParseError(offset_, "implausible record length");
        std::vector<std::uint8_t> frame(incl);
        in_.read(reinterpret_cast<char*>(frame.data()), incl);
        if (in_.gcount() != static_cast<std::streamsize>(incl))
            throw ParseError(offset_ + sizeof(rec), "packet record shorter than its header claims");
        offset_ += sizeof(rec) + incl;
        ++stats_.packets;

        // Peel the link layer down to an IPv4 header.
        const std::uint8_t* p = frame.data();
        std::size_t len = frame.size();
        if (linktype_ == kLinkEthernet) {
            if (len < 14) { ++stats_.non_ip; continue; }
            std::uint16_t ethertype = be16(p + 12);
            std::size_t skip = 14;
            if (ethertype == 0x8100) {  // single VLAN tag
                if (len < 18) { ++stats_.non_ip; continue; }
                ethertype = be16(p + 16);
                skip = 18;
            }
            if (ethertype != 0x0800) { ++stats_.non_ip; continue; }
            p += skip;
            len -= skip;
        }
        if (len < 20 || (p[0] >> 4) != 4) { ++stats_.non_ip; continue; }

        const std::size_t ihl = static_cast<std::size_t>(p[0] & 0x0F) * 4;
        const std::uint16_t total_len = be16(p + 2);
        if (ihl < 20 || len < ihl || total_len < ihl) { ++stats_.non_transport; continue; }
        const std::uint16_t frag = be16(p + 6);
        if ((frag & 0x1FFF) != 0) { ++stats_.non_transport; continue; }  // later fragment

        RawPacket pkt;
        pkt.ts = static_cast<double>(ts_sec) +
                 static_cast<double>(ts_sub) * (nanos_ ? 1e-9 : 1e-6);
        pkt.protocol = p[9];
        pkt.src_ip = be32(p + 12);
        pkt.dst_ip = be32(p + 16);

        const std::uint8_t* t = p + ihl;
        const std::size_t t_have = std::min(len, static_cast<std::size_t>(total_len)) - ihl;
        if (pkt.protocol == 6) {  // TCP
            if (t_have < 20) { ++stats_.non_transport; continue; }
            pkt.src_port = be16(t);
            pkt.dst_port = be16(t + 2);
            const std::size_t doff = static_cast<std::size_t>(t[12] >> 4) * 4;
            if (doff < 20 || t_have < doff) { ++stats_.non_transport; continue; }
            pkt.tcp_window = be16(t + 14);
            pkt.payload.assign(t + doff, t + t_have);
        } else if (pkt.protocol == 17) {  // UDP
            if (t_have < 8) { ++stats_.non_transport; continue; }
            pkt.src_port = be16(t);
            pkt.dst_port = be16(t + 2);
            pkt.tcp_window = 0;
            pkt.payload.assign(t + 8, t + t_have);
        } else {
            ++stats_.non_transport;
            continue;
        }
        return pkt;
    }
}

}  // namespace prime
