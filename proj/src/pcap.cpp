#include "tpb/pcap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <vector>

#include "tpb/error.hpp"

namespace tpb {

namespace {

constexpr std::size_t kGlobalHeaderSize = 24;
constexpr std::size_t kRecordHeaderSize = 16;
constexpr std::uint32_t kMaxRecordSize = 64u << 20;

constexpr std::uint16_t kEtherIpv4 = 0x0800;
constexpr std::uint16_t kEtherVlan = 0x8100;
constexpr std::uint16_t kEtherQinQ = 0x88a8;
constexpr std::uint16_t kEtherVlanLegacy = 0x9100;

constexpr std::uint8_t kIpProtoIcmp = 1;
constexpr std::uint8_t kIpProtoTcp = 6;
constexpr std::uint8_t kIpProtoUdp = 17;

std::uint32_t bswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

class ByteReader {
public:
    ByteReader(std::span<const std::byte> bytes, bool swapped) : bytes_(bytes), swapped_(swapped) {}

    std::uint32_t u32(std::size_t off) const {
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | std::to_integer<std::uint32_t>(bytes_[off + i]);
        return swapped_ ? bswap32(v) : v;
    }
    std::uint16_t u16(std::size_t off) const {
        const auto lo = std::to_integer<std::uint16_t>(bytes_[off]);
        const auto hi = std::to_integer<std::uint16_t>(bytes_[off + 1]);
        return swapped_ ? static_cast<std::uint16_t>((lo << 8) | hi)
                        : static_cast<std::uint16_t>((hi << 8) | lo);
    }

private:
    std::span<const std::byte> bytes_;
    bool swapped_;
};

// Network byte order helpers for packet payloads.
std::uint16_t be16(std::span<const std::byte> b, std::size_t off) {
    return static_cast<std::uint16_t>((std::to_integer<unsigned>(b[off]) << 8) |
                                      std::to_integer<unsigned>(b[off + 1]));
}
std::uint32_t be32(std::span<const std::byte> b, std::size_t off) {
    return (static_cast<std::uint32_t>(be16(b, off)) << 16) | be16(b, off + 2);
}

struct Decoded {
    PacketRecord packet;
    bool ip = false;
};

Decoded decode_ethernet(std::span<const std::byte> frame) {
    Decoded d;
    if (frame.size() < 14) return d;
    std::size_t off = 12;
    std::uint16_t ethertype = be16(frame, off);
    while ((ethertype == kEtherVlan || ethertype == kEtherQinQ || ethertype == kEtherVlanLegacy) &&
           frame.size() >= off + 6) {
        off += 4;
        ethertype = be16(frame, off);
    }
    off += 2;
    if (ethertype != kEtherIpv4 || frame.size() < off + 20) return d;

    const auto ip = frame.subspan(off);
    const unsigned version = std::to_integer<unsigned>(ip[0]) >> 4;
    const std::size_t ihl = (std::to_integer<std::size_t>(ip[0]) & 0x0f) * 4;
    if (version != 4 || ihl < 20 || ip.size() < ihl) return d;

    d.ip = true;
    auto& p = d.packet;
    p.src_ip = be32(ip, 12);
    p.dst_ip = be32(ip, 16);
    const bool first_fragment = (be16(ip, 6) & 0x1fff) == 0;
    const auto transport = ip.subspan(ihl);
    switch (std::to_integer<std::uint8_t>(ip[9])) {
        case kIpProtoTcp:
            p.protocol = Protocol::TCP;
            if (first_fragment && transport.size() >= 16) {
                p.src_port = be16(transport, 0);
                p.dst_port = be16(transport, 2);
                p.tcp_window = be16(transport, 14);
            }
            break;
        case kIpProtoUdp:
            p.protocol = Protocol::UDP;
            if (first_fragment && transport.size() >= 4) {
                p.src_port = be16(transport, 0);
                p.dst_port = be16(transport, 2);
            }
            break;
        case kIpProtoIcmp: p.protocol = Protocol::ICMP; break;
        default: p.protocol = Protocol::OTHER; break;
    }
    return d;
}

}  // namespace

PcapParseResult parse_pcap(std::span<const std::byte> bytes, const std::string& label) {
    if (bytes.size() < kGlobalHeaderSize)
        throw DataError("pcap: global header truncated (" + std::to_string(bytes.size()) + " bytes)");

    PcapParseResult result;
    auto& header = result.header;
    const std::uint32_t raw_magic = ByteReader(bytes, false).u32(0);
    if (raw_magic == kPcapMagicMicros || raw_magic == kPcapMagicNanos) {
        header.swapped = false;
    } else if (bswap32(raw_magic) == kPcapMagicMicros || bswap32(raw_magic) == kPcapMagicNanos) {
        header.swapped = true;
    } else {
        throw DataError("pcap: bad magic number (pcapng and other formats are not supported)");
    }
    const ByteReader reader(bytes, header.swapped);
    header.magic = reader.u32(0);
    header.nanosecond = header.magic == kPcapMagicNanos;
    header.version_major = reader.u16(4);
    header.version_minor = reader.u16(6);
    header.snaplen = reader.u32(16);
    header.linktype = reader.u32(20) & 0x0fffffffu;
    if (header.version_major != 2)
        throw DataError("pcap: unsupported version " + std::to_string(header.version_major));
    if (header.linktype != kLinktypeEthernet)
        throw DataError("pcap: unsupported linktype " + std::to_string(header.linktype) +
                        " (only Ethernet is supported)");

    struct Timed {
        std::int64_t ns;
        PacketRecord packet;
    };
    std::vector<Timed> records;
    const std::int64_t subsec_scale = header.nanosecond ? 1 : 1000;
    std::size_t off = kGlobalHeaderSize;
    while (off < bytes.size()) {
        if (bytes.size() - off < kRecordHeaderSize) {
            ++result.stats.truncated_records;
            break;
        }
        const std::uint32_t ts_sec = reader.u32(off);
        const std::uint32_t ts_sub = reader.u32(off + 4);
        const std::uint32_t incl_len = reader.u32(off + 8);
        const std::uint32_t orig_len = reader.u32(off + 12);
        off += kRecordHeaderSize;
        if (incl_len > kMaxRecordSize || bytes.size() - off < incl_len) {
            ++result.stats.truncated_records;
            break;
        }
        Decoded d = decode_ethernet(bytes.subspan(off, incl_len));
        off += incl_len;
        if (!d.ip) ++result.stats.non_ip;
        d.packet.length = orig_len;
        const std::int64_t ns = static_cast<std::int64_t>(ts_sec) * 1'000'000'000 +
                                static_cast<std::int64_t>(ts_sub) * subsec_scale;
        if (!records.empty() && ns < records.back().ns) ++result.stats.reordered;
        records.push_back({ns, d.packet});
    }
    result.stats.records = records.size();
    if (records.empty()) throw DataError("pcap: no packet records could be read");

    std::stable_sort(records.begin(), records.end(),
                     [](const Timed& a, const Timed& b) { return a.ns < b.ns; });
    const std::int64_t t0 = records.front().ns;
    result.trace.label = label;
    result.trace.packets.reserve(records.size());
    for (auto& r : records) {
        r.packet.timestamp = static_cast<double>(r.ns - t0) / 1e9;
        result.trace.packets.push_back(r.packet);
    }
    return result;
}

PcapParseResult read_pcap_file(const std::filesystem::path& path, const std::string& label) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open pcap file '" + path.string() + "': file not found or unreadable");
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_pcap(std::as_bytes(std::span<const char>(raw)), label);
}

namespace {

class ByteWriter {
public:
    explicit ByteWriter(bool big_endian) : big_(big_endian) {}

    void u16(std::uint16_t v) { put(v, 2, big_); }
    void u32(std::uint32_t v) { put(v, 4, big_); }
    void be16(std::uint16_t v) { put(v, 2, true); }
    void be32(std::uint32_t v) { put(v, 4, true); }
    void zeros(std::size_t n) { out_.insert(out_.end(), n, std::byte{0}); }
    std::vector<std::byte>& bytes() { return out_; }

private:
    void put(std::uint32_t v, int n, bool big) {
        for (int i = 0; i < n; ++i) {
            const int shift = big ? 8 * (n - 1 - i) : 8 * i;
            out_.push_back(static_cast<std::byte>((v >> shift) & 0xff));
        }
    }
    bool big_;
    std::vector<std::byte> out_;
};

}  // namespace

std::vector<std::byte> encode_pcap(const Trace& trace, bool nanosecond, bool big_endian, std::uint32_t epoch) {
    ByteWriter w(big_endian);
    w.u32(nanosecond ? kPcapMagicNanos : kPcapMagicMicros);
    w.u16(2);
    w.u16(4);
    w.u32(0);
    w.u32(0);
    w.u32(65535);
    w.u32(kLinktypeEthernet);
    const std::uint64_t scale = nanosecond ? 1'000'000'000ULL : 1'000'000ULL;
    for (const auto& p : trace.packets) {
        if (!(p.timestamp >= 0.0)) throw DataError("encode_pcap: negative or NaN timestamp");
        const auto ticks = static_cast<std::uint64_t>(std::llround(p.timestamp * static_cast<double>(scale)));
        std::size_t transport = 0;
        std::uint8_t proto = 47;
        switch (p.protocol) {
            case Protocol::TCP: transport = 20; proto = kIpProtoTcp; break;
            case Protocol::UDP: transport = 8; proto = kIpProtoUdp; break;
            case Protocol::ICMP: transport = 8; proto = kIpProtoIcmp; break;
            case Protocol::OTHER: break;
        }
        const std::uint32_t caplen = static_cast<std::uint32_t>(14 + 20 + transport);
        w.u32(epoch + static_cast<std::uint32_t>(ticks / scale));
        w.u32(static_cast<std::uint32_t>(ticks % scale));
        w.u32(caplen);
        w.u32(p.length);
        w.zeros(12);  // MAC addresses
        w.be16(kEtherIpv4);
        w.be16(0x4500);
        w.be16(static_cast<std::uint16_t>(std::min<std::uint32_t>(p.length >= 14 ? p.length - 14 : 0, 0xffff)));
        w.be32(0);  // identification, flags, fragment offset
        w.be16(static_cast<std::uint16_t>((64u << 8) | proto));
        w.be16(0);  // checksum
        w.be32(p.src_ip);
        w.be32(p.dst_ip);
        if (p.protocol == Protocol::TCP) {
            w.be16(p.src_port);
            w.be16(p.dst_port);
            w.zeros(8);
            w.be16(0x5010);
            w.be16(p.tcp_window);
            w.zeros(4);
        } else if (p.protocol == Protocol::UDP) {
            w.be16(p.src_port);
            w.be16(p.dst_port);
            w.zeros(4);
        } else if (p.protocol == Protocol::ICMP) {
            w.zeros(8);
        }
    }
    return std::move(w.bytes());
}

void write_pcap_file(const std::filesystem::path& path, const Trace& trace, bool nanosecond) {
    const auto bytes = encode_pcap(trace, nanosecond);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write pcap file '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("error while writing pcap file '" + path.string() + "'");
}

}  // namespace tpb
