#pragma once

#include <cctype>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

// Byte-level builders for capture-file fixtures.  Everything here assembles
// raw bytes directly so reader tests exercise the wire format, not a shared
// serializer.

namespace testsupport {

// "d4 c3 b2 a1" (whitespace/comments-free hex) -> bytes.
inline std::vector<std::uint8_t> from_hex(const std::string& hex) {
    std::vector<std::uint8_t> out;
    int hi = -1;
    for (char c : hex) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        const int v = std::isdigit(static_cast<unsigned char>(c))
                          ? c - '0'
                          : std::tolower(static_cast<unsigned char>(c)) - 'a' + 10;
        if (v < 0 || v > 15) throw std::runtime_error("bad hex digit in fixture");
        if (hi < 0) {
            hi = v;
        } else {
            out.push_back(static_cast<std::uint8_t>((hi << 4) | v));
            hi = -1;
        }
    }
    if (hi >= 0) throw std::runtime_error("odd hex digit count in fixture");
    return out;
}

// Builds classic pcap files.  big_endian flips the byte order of every file
// and record header integer (frame contents are network order regardless).
class PcapBuilder {
public:
    explicit PcapBuilder(std::uint32_t magic = 0xA1B2C3D4u, std::uint32_t linktype = 1,
                         bool big_endian = false)
        : big_endian_(big_endian) {
        put32(magic);
        put16(2);
        put16(4);
        put32(0);  // thiszone
        put32(0);  // sigfigs
        put32(65535);
        put32(linktype);
    }

    void add_record(std::uint32_t ts_sec, std::uint32_t ts_sub,
                    const std::vector<std::uint8_t>& frame) {
        add_record_raw(ts_sec, ts_sub, static_cast<std::uint32_t>(frame.size()),
                       static_cast<std::uint32_t>(frame.size()), frame);
    }

    // incl/orig chosen by the caller; `body` is what actually lands in the
    // file (truncation fixtures claim more bytes than they provide).
    void add_record_raw(std::uint32_t ts_sec, std::uint32_t ts_sub, std::uint32_t incl_len,
                        std::uint32_t orig_len, const std::vector<std::uint8_t>& body) {
        put32(ts_sec);
        put32(ts_sub);
        put32(incl_len);
        put32(orig_len);
        bytes_.insert(bytes_.end(), body.begin(), body.end());
    }

    void append(const std::vector<std::uint8_t>& raw) {
        bytes_.insert(bytes_.end(), raw.begin(), raw.end());
    }

    std::string str() const {
        return std::string(reinterpret_cast<const char*>(bytes_.data()), bytes_.size());
    }

    std::size_t size() const { return bytes_.size(); }

private:
    void put16(std::uint16_t v) {
        if (big_endian_) {
            bytes_.push_back(static_cast<std::uint8_t>(v >> 8));
            bytes_.push_back(static_cast<std::uint8_t>(v));
        } else {
            bytes_.push_back(static_cast<std::uint8_t>(v));
            bytes_.push_back(static_cast<std::uint8_t>(v >> 8));
        }
    }

    void put32(std::uint32_t v) {
        if (big_endian_) {
            for (int s = 24; s >= 0; s -= 8) bytes_.push_back(static_cast<std::uint8_t>(v >> s));
        } else {
            for (int s = 0; s <= 24; s += 8) bytes_.push_back(static_cast<std::uint8_t>(v >> s));
        }
    }

    bool big_endian_;
    std::vector<std::uint8_t> bytes_;
};

inline void put_be16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v >> 8));
    b.push_back(static_cast<std::uint8_t>(v));
}

inline void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

inline std::vector<std::uint8_t> tcp_segment(std::uint16_t sport, std::uint16_t dport,
                                             std::uint16_t window,
                                             const std::vector<std::uint8_t>& payload) {
    std::vector<std::uint8_t> t;
    put_be16(t, sport);
    put_be16(t, dport);
    put_be32(t, 0);  // seq
    put_be32(t, 0);  // ack
    t.push_back(0x50);  // data offset 5 words
    t.push_back(0x18);  // PSH|ACK
    put_be16(t, window);
    put_be16(t, 0);  // checksum (ignored)
    put_be16(t, 0);  // urgent
    t.insert(t.end(), payload.begin(), payload.end());
    return t;
}

inline std::vector<std::uint8_t> udp_datagram(std::uint16_t sport, std::uint16_t dport,
                                              const std::vector<std::uint8_t>& payload) {
    std::vector<std::uint8_t> u;
    put_be16(u, sport);
    put_be16(u, dport);
    put_be16(u, static_cast<std::uint16_t>(8 + payload.size()));
    put_be16(u, 0);
    u.insert(u.end(), payload.begin(), payload.end());
    return u;
}

// total_len_override = 0 means "compute from the transport bytes".
inline std::vector<std::uint8_t> ipv4_packet(std::uint8_t protocol, std::uint32_t src,
                                             std::uint32_t dst,
                                             const std::vector<std::uint8_t>& transport,
                                             std::uint16_t total_len_override = 0,
                                             std::uint16_t frag_field = 0) {
    std::vector<std::uint8_t> p;
    p.push_back(0x45);  // IPv4, 20-byte header
    p.push_back(0);
    put_be16(p, total_len_override ? total_len_override
                                   : static_cast<std::uint16_t>(20 + transport.size()));
    put_be16(p, 0x0001);  // id
    put_be16(p, frag_field);
    p.push_back(64);  // ttl
    p.push_back(protocol);
    put_be16(p, 0);  // checksum (ignored)
    put_be32(p, src);
    put_be32(p, dst);
    p.insert(p.end(), transport.begin(), transport.end());
    return p;
}

inline std::vector<std::uint8_t> eth_frame(std::uint16_t ethertype,
                                           const std::vector<std::uint8_t>& payload) {
    std::vector<std::uint8_t> f(12, 0xAA);  // MACs, ignored by the parser
    put_be16(f, ethertype);
    f.insert(f.end(), payload.begin(), payload.end());
    return f;
}

inline std::vector<std::uint8_t> vlan_eth_frame(std::uint16_t inner_ethertype,
                                                const std::vector<std::uint8_t>& payload) {
    std::vector<std::uint8_t> f(12, 0xAA);
    put_be16(f, 0x8100);
    put_be16(f, 0x0064);  // VID 100
    put_be16(f, inner_ethertype);
    f.insert(f.end(), payload.begin(), payload.end());
    return f;
}

// One Ethernet/IPv4/TCP frame, the common case in these tests.
inline std::vector<std::uint8_t> tcp_frame(std::uint32_t src_ip, std::uint16_t sport,
                                           std::uint32_t dst_ip, std::uint16_t dport,
                                           std::uint16_t window,
                                           const std::vector<std::uint8_t>& payload) {
    return eth_frame(0x0800, ipv4_packet(6, src_ip, dst_ip,
                                         tcp_segment(sport, dport, window, payload)));
}

inline std::vector<std::uint8_t> udp_frame(std::uint32_t src_ip, std::uint16_t sport,
                                           std::uint32_t dst_ip, std::uint16_t dport,
                                           const std::vector<std::uint8_t>& payload) {
    return eth_frame(0x0800, ipv4_packet(17, src_ip, dst_ip,
                                         udp_datagram(sport, dport, payload)));
}

}  // namespace testsupport
