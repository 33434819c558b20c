#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace tpb {

enum class Protocol : std::uint8_t { TCP, UDP, ICMP, OTHER };

std::string_view to_string(Protocol p) noexcept;
Protocol protocol_from_string(std::string_view name);  // throws DataError

/// One captured packet. Timestamps are seconds since trace start.
struct PacketRecord {
    double timestamp = 0.0;
    std::uint32_t length = 0;
    Protocol protocol = Protocol::OTHER;
    std::uint32_t src_ip = 0;
    std::uint32_t dst_ip = 0;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    std::uint16_t tcp_window = 0;

    friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

enum class Scenario : std::uint8_t { MicOnOff, MicOnNoise, UtilityMediaTravel, Custom };

std::string_view to_string(Scenario s) noexcept;
Scenario scenario_from_string(std::string_view name);  // throws DataError

/// Number of classes the scenario is defined with, or 0 for Custom (any count >= 2).
std::size_t scenario_class_count(Scenario s) noexcept;

struct Trace {
    std::vector<PacketRecord> packets;
    std::string label;
    Scenario scenario = Scenario::Custom;
};

/// Throws DataError describing the first violated packet or trace invariant.
void validate(const Trace& trace);

struct Gaussian {
    double mean = 0.0;
    double std = 0.0;
};

/// A packet-length level used by bursty profiles. Every `regime_packets`
/// packets the generator draws one regime by weight and centres the
/// packet-length distribution on `length_mean` (plus uniform jitter).
struct LengthRegime {
    double weight = 1.0;
    double length_mean = 0.0;
};

enum class Timing : std::uint8_t {
    Poisson,   // exponential gaps with mean 1/rate
    Periodic,  // constant gaps of 1/rate
};

/// Generative parameters for one traffic class.
struct ClassProfile {
    std::string label;
    double packet_rate = 100.0;                              // packets per second
    std::array<double, 3> protocol_mix{1.0, 0.0, 0.0};       // TCP, UDP, ICMP
    Gaussian length{500.0, 100.0};                           // bytes, clamped to [40, 1514]
    Gaussian tcp_window{16384.0, 2048.0};                    // clamped to [0, 65535]
    std::size_t endpoint_pool = 4;                           // distinct IP tokens, device included
    std::size_t port_pool = 8;
    double ipt_jitter_std = 0.0;                             // seconds
    Timing timing = Timing::Poisson;

    std::vector<LengthRegime> regimes;                       // empty: no bursts
    std::size_t regime_packets = 0;
    double regime_jitter = 0.0;                              // half-width of uniform offset, bytes
};

/// Throws std::invalid_argument naming the offending field.
void validate(const ClassProfile& profile);

inline constexpr std::uint32_t kMinPacketLength = 40;
inline constexpr std::uint32_t kMaxPacketLength = 1514;

Trace generate_trace(const ClassProfile& profile, double duration, std::uint64_t seed);

/// Balanced corpus: `traces_per_class` traces for each profile, ordered by
/// profile then trace index. Per-trace seeds derive from `seed`.
std::vector<Trace> generate_dataset(const std::vector<ClassProfile>& profiles,
                                    std::size_t traces_per_class, double duration,
                                    std::uint64_t seed, Scenario scenario = Scenario::Custom);

/// Seed used for trace `index` of class `class_index` by generate_dataset.
std::uint64_t dataset_trace_seed(std::uint64_t seed, std::size_t class_index, std::size_t index);

struct ScenarioPreset {
    Scenario scenario = Scenario::Custom;
    std::vector<ClassProfile> profiles;
};

/// Built-in profile sets. Names: mic_on_off, mic_on_noise, utility_media_travel,
/// bursty_2, bursty_3, window_only_2, window_only_3.
ScenarioPreset scenario_preset(std::string_view name);
std::vector<std::string> preset_names();

// Line-delimited text format: "# key=value" header lines, then one packet per line
// as "timestamp,length,protocol,src_ip,dst_ip,src_port,dst_port,tcp_window".
void write_trace(std::ostream& out, const Trace& trace);
Trace read_trace(std::istream& in);  // throws DataError with the line number

}  // namespace tpb
