#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tpb/traffic_model.hpp"

namespace tpb {

inline constexpr std::uint32_t kPcapMagicMicros = 0xa1b2c3d4;
inline constexpr std::uint32_t kPcapMagicNanos = 0xa1b23c4d;
inline constexpr std::uint32_t kLinktypeEthernet = 1;

struct PcapHeader {
    std::uint32_t magic = kPcapMagicMicros;  // as written in the file's own byte order
    bool swapped = false;                    // file byte order differs from little-endian reading
    bool nanosecond = false;
    std::uint16_t version_major = 2;
    std::uint16_t version_minor = 4;
    std::uint32_t snaplen = 65535;
    std::uint32_t linktype = kLinktypeEthernet;
};

struct PcapStats {
    std::size_t records = 0;
    std::size_t truncated_records = 0;  // 0 or 1: parsing stops at the first truncated record
    std::size_t reordered = 0;          // records whose timestamp precedes the previous one
    std::size_t non_ip = 0;             // mapped to Protocol::OTHER
};

struct PcapParseResult {
    Trace trace;
    PcapHeader header;
    PcapStats stats;
};

/// Parse a classic libpcap capture (either byte order, µs or ns timestamps,
/// Ethernet link type). Timestamps are rebased so the first packet is at 0.
/// Throws DataError on a malformed global header, an unsupported link type,
/// or when no packet could be read.
PcapParseResult parse_pcap(std::span<const std::byte> bytes, const std::string& label);

PcapParseResult read_pcap_file(const std::filesystem::path& path, const std::string& label);

/// Inverse of parse_pcap for traces: Ethernet/IPv4 frames carrying just the
/// transport headers, orig_len set to the packet length. Protocol::OTHER is
/// written as IP protocol 47. Timestamps are offset by `epoch` seconds.
std::vector<std::byte> encode_pcap(const Trace& trace, bool nanosecond = false, bool big_endian = false,
                                   std::uint32_t epoch = 1'600'000'000);
void write_pcap_file(const std::filesystem::path& path, const Trace& trace, bool nanosecond = false);

}  // namespace tpb
