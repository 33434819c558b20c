#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fixture {

// Byte-level pcap writer that knows nothing about the library: every header
// field is laid down by hand so parsed values can be checked against it.
class PcapBuilder {
public:
    PcapBuilder(bool big_endian, bool nanosecond, std::uint32_t linktype = 1, std::uint32_t snaplen = 65535);

    // Timestamp given as whole seconds plus sub-second ticks (µs or ns).
    PcapBuilder& tcp(std::uint32_t sec, std::uint32_t frac, std::uint32_t orig_len, std::uint32_t src,
                     std::uint32_t dst, std::uint16_t sport, std::uint16_t dport, std::uint16_t window,
                     bool vlan = false);
    PcapBuilder& udp(std::uint32_t sec, std::uint32_t frac, std::uint32_t orig_len, std::uint32_t src,
                     std::uint32_t dst, std::uint16_t sport, std::uint16_t dport);
    PcapBuilder& icmp(std::uint32_t sec, std::uint32_t frac, std::uint32_t orig_len, std::uint32_t src,
                      std::uint32_t dst);
    PcapBuilder& arp(std::uint32_t sec, std::uint32_t frac, std::uint32_t orig_len);
    // Record header claiming `claimed` captured bytes followed by only `present` of them.
    PcapBuilder& truncated(std::uint32_t sec, std::uint32_t frac, std::uint32_t claimed, std::uint32_t present);

    const std::vector<std::byte>& bytes() const { return bytes_; }
    void write(const std::filesystem::path& path) const;

private:
    void u16(std::vector<std::byte>& out, std::uint16_t v) const;  // file byte order
    void u32(std::vector<std::byte>& out, std::uint32_t v) const;
    void record(std::uint32_t sec, std::uint32_t frac, std::uint32_t orig_len, const std::vector<std::byte>& frame);

    bool big_;
    std::vector<std::byte> bytes_;
};

// Network-order helpers for frame contents.
void be16(std::vector<std::byte>& out, std::uint16_t v);
void be32(std::vector<std::byte>& out, std::uint32_t v);

}  // namespace fixture

namespace testutil {

// Fresh directory under TPB_TEST_TMP (or the system temp dir), removed first if present.
std::filesystem::path temp_dir(const std::string& name);
std::string slurp(const std::filesystem::path& path);

}  // namespace testutil
