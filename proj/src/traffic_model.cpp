#include "tpb/traffic_model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "tpb/csv.hpp"
#include "tpb/error.hpp"
#include "tpb/seed.hpp"

namespace tpb {

namespace {

constexpr std::uint32_t kIpTokenBase = 0x0A000001;
constexpr std::uint16_t kPortBase = 1024;
constexpr std::uint16_t kPortStride = 97;

template <typename Int>
Int clamp_round(double value, Int lo, Int hi) {
    const double r = std::round(value);
    if (r <= static_cast<double>(lo)) return lo;
    if (r >= static_cast<double>(hi)) return hi;
    return static_cast<Int>(r);
}

double draw_gaussian(std::mt19937_64& rng, const Gaussian& g) {
    if (g.std == 0.0) return g.mean;
    std::normal_distribution<double> dist(g.mean, g.std);
    return dist(rng);
}

}  // namespace

std::string_view to_string(Protocol p) noexcept {
    switch (p) {
        case Protocol::TCP: return "TCP";
        case Protocol::UDP: return "UDP";
        case Protocol::ICMP: return "ICMP";
        case Protocol::OTHER: return "OTHER";
    }
    return "OTHER";
}

Protocol protocol_from_string(std::string_view name) {
    if (name == "TCP") return Protocol::TCP;
    if (name == "UDP") return Protocol::UDP;
    if (name == "ICMP") return Protocol::ICMP;
    if (name == "OTHER") return Protocol::OTHER;
    throw DataError("unknown protocol '" + std::string(name) + "'");
}

std::string_view to_string(Scenario s) noexcept {
    switch (s) {
        case Scenario::MicOnOff: return "MicOnOff";
        case Scenario::MicOnNoise: return "MicOnNoise";
        case Scenario::UtilityMediaTravel: return "UtilityMediaTravel";
        case Scenario::Custom: return "Custom";
    }
    return "Custom";
}

Scenario scenario_from_string(std::string_view name) {
    if (name == "MicOnOff") return Scenario::MicOnOff;
    if (name == "MicOnNoise") return Scenario::MicOnNoise;
    if (name == "UtilityMediaTravel") return Scenario::UtilityMediaTravel;
    if (name == "Custom") return Scenario::Custom;
    throw DataError("unknown scenario '" + std::string(name) + "'");
}

std::size_t scenario_class_count(Scenario s) noexcept {
    switch (s) {
        case Scenario::MicOnOff:
        case Scenario::MicOnNoise: return 2;
        case Scenario::UtilityMediaTravel: return 3;
        case Scenario::Custom: return 0;
    }
    return 0;
}

void validate(const Trace& trace) {
    if (trace.packets.empty()) throw DataError("trace '" + trace.label + "' is empty");
    double previous = 0.0;
    for (std::size_t i = 0; i < trace.packets.size(); ++i) {
        const auto& p = trace.packets[i];
        const auto where = [&] { return "packet " + std::to_string(i) + ": "; };
        if (!(p.timestamp >= 0.0)) throw DataError(where() + "negative timestamp");
        if (p.timestamp < previous) throw DataError(where() + "timestamps not sorted");
        previous = p.timestamp;
        if (p.protocol != Protocol::TCP && p.tcp_window != 0)
            throw DataError(where() + "tcp_window set on a non-TCP packet");
        if ((p.protocol == Protocol::ICMP || p.protocol == Protocol::OTHER) &&
            (p.src_port != 0 || p.dst_port != 0))
            throw DataError(where() + "ports set on a portless protocol");
    }
}

void validate(const ClassProfile& profile) {
    const auto fail = [&](const std::string& what) {
        throw std::invalid_argument("profile '" + profile.label + "': " + what);
    };
    if (!(profile.packet_rate > 0.0) || !std::isfinite(profile.packet_rate))
        fail("packet_rate must be > 0");
    double mix_sum = 0.0;
    for (double p : profile.protocol_mix) {
        if (!(p >= 0.0)) fail("protocol_mix entries must be >= 0");
        mix_sum += p;
    }
    if (std::abs(mix_sum - 1.0) > 1e-9) fail("protocol_mix must sum to 1");
    if (!(profile.length.std >= 0.0) || !(profile.tcp_window.std >= 0.0) ||
        !(profile.ipt_jitter_std >= 0.0) || !(profile.regime_jitter >= 0.0))
        fail("standard deviations must be >= 0");
    if (profile.endpoint_pool < 1) fail("endpoint_pool must be >= 1");
    if (profile.port_pool < 1) fail("port_pool must be >= 1");
    if (profile.port_pool > (65535 - kPortBase) / kPortStride) fail("port_pool too large");
    if (!profile.regimes.empty()) {
        if (profile.regime_packets < 1) fail("regime_packets must be >= 1 when regimes are set");
        double total = 0.0;
        for (const auto& r : profile.regimes) {
            if (!(r.weight >= 0.0)) fail("regime weights must be >= 0");
            total += r.weight;
        }
        if (!(total > 0.0)) fail("regime weights must not all be zero");
    }
}

Trace generate_trace(const ClassProfile& profile, double duration, std::uint64_t seed) {
    validate(profile);
    if (!(duration > 0.0) || !std::isfinite(duration))
        throw std::invalid_argument("duration must be > 0");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick_remote(
        1, std::max<std::size_t>(profile.endpoint_pool, 2) - 1);
    std::uniform_int_distribution<std::size_t> pick_port(0, profile.port_pool - 1);
    std::exponential_distribution<double> exp_gap(profile.packet_rate);
    std::normal_distribution<double> jitter(0.0, profile.ipt_jitter_std > 0 ? profile.ipt_jitter_std : 1.0);

    std::vector<double> regime_weights;
    for (const auto& r : profile.regimes) regime_weights.push_back(r.weight);
    std::discrete_distribution<std::size_t> pick_regime(regime_weights.begin(), regime_weights.end());
    std::uniform_real_distribution<double> regime_offset(-profile.regime_jitter, profile.regime_jitter);

    const double cum_tcp = profile.protocol_mix[0];
    const double cum_udp = cum_tcp + profile.protocol_mix[1];
    const double cum_icmp = cum_udp + profile.protocol_mix[2];
    const auto duration_us = static_cast<std::int64_t>(std::floor(duration * 1e6));

    Trace trace;
    trace.label = profile.label;
    trace.packets.reserve(static_cast<std::size_t>(duration * profile.packet_rate * 1.1) + 16);

    Gaussian length = profile.length;
    std::int64_t t_us = 0;
    for (std::size_t n = 0;; ++n) {
        if (n > 0) {
            double gap = profile.timing == Timing::Poisson ? exp_gap(rng) : 1.0 / profile.packet_rate;
            if (profile.ipt_jitter_std > 0.0) gap += jitter(rng);
            t_us += std::max<std::int64_t>(1, std::llround(gap * 1e6));
        }
        if (t_us > duration_us) break;

        if (!profile.regimes.empty() && n % profile.regime_packets == 0) {
            length.mean = profile.regimes[pick_regime(rng)].length_mean;
            if (profile.regime_jitter > 0.0) length.mean += regime_offset(rng);
        }

        PacketRecord p;
        p.timestamp = static_cast<double>(t_us) / 1e6;
        const double u = unit(rng);
        p.protocol = u < cum_tcp ? Protocol::TCP
                   : u < cum_udp ? Protocol::UDP
                   : u < cum_icmp ? Protocol::ICMP
                                  : Protocol::TCP;  // rounding slack in the mix
        p.length = clamp_round<std::uint32_t>(draw_gaussian(rng, length), kMinPacketLength,
                                              kMaxPacketLength);

        const std::uint32_t device = kIpTokenBase;
        const std::uint32_t remote =
            profile.endpoint_pool > 1 ? kIpTokenBase + static_cast<std::uint32_t>(pick_remote(rng))
                                      : device;
        const bool outbound = unit(rng) < 0.5;
        p.src_ip = outbound ? device : remote;
        p.dst_ip = outbound ? remote : device;

        if (p.protocol == Protocol::TCP || p.protocol == Protocol::UDP) {
            p.src_port = static_cast<std::uint16_t>(kPortBase + kPortStride * pick_port(rng));
            p.dst_port = static_cast<std::uint16_t>(kPortBase + kPortStride * pick_port(rng));
        }
        if (p.protocol == Protocol::TCP)
            p.tcp_window = clamp_round<std::uint16_t>(draw_gaussian(rng, profile.tcp_window), 0, 65535);
        trace.packets.push_back(p);
    }
    return trace;
}

std::uint64_t dataset_trace_seed(std::uint64_t seed, std::size_t class_index, std::size_t index) {
    return derive_seed(seed, {fnv1a("trace"), class_index, index});
}

std::vector<Trace> generate_dataset(const std::vector<ClassProfile>& profiles,
                                    std::size_t traces_per_class, double duration,
                                    std::uint64_t seed, Scenario scenario) {
    if (profiles.size() < 2) throw std::invalid_argument("generate_dataset needs at least 2 profiles");
    if (traces_per_class < 1) throw std::invalid_argument("traces_per_class must be >= 1");
    const std::size_t expected = scenario_class_count(scenario);
    if (expected != 0 && profiles.size() != expected)
        throw std::invalid_argument("scenario " + std::string(to_string(scenario)) + " has " +
                                    std::to_string(expected) + " classes, got " +
                                    std::to_string(profiles.size()));
    for (std::size_t i = 0; i < profiles.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (profiles[i].label == profiles[j].label)
                throw std::invalid_argument("duplicate profile label '" + profiles[i].label + "'");

    std::vector<Trace> out;
    out.reserve(profiles.size() * traces_per_class);
    for (std::size_t c = 0; c < profiles.size(); ++c) {
        for (std::size_t i = 0; i < traces_per_class; ++i) {
            Trace t = generate_trace(profiles[c], duration, dataset_trace_seed(seed, c, i));
            t.scenario = scenario;
            out.push_back(std::move(t));
        }
    }
    return out;
}

namespace {

ClassProfile make_profile(std::string label, double rate, std::array<double, 3> mix,
                          Gaussian length, Gaussian window, std::size_t ips, std::size_t ports,
                          double jitter) {
    ClassProfile p;
    p.label = std::move(label);
    p.packet_rate = rate;
    p.protocol_mix = mix;
    p.length = length;
    p.tcp_window = window;
    p.endpoint_pool = ips;
    p.port_pool = ports;
    p.ipt_jitter_std = jitter;
    return p;
}

// Bursty classes share every marginal statistic except how the packet-length level
// alternates between bursts; all burst-level sequences have the same mean and variance.
// Period 1/64 s: every timestamp is exact in binary, timing features are exact constants.
ClassProfile bursty(std::string label, std::vector<LengthRegime> regimes) {
    ClassProfile p;
    p.label = std::move(label);
    p.packet_rate = 64.0;
    p.timing = Timing::Periodic;
    p.protocol_mix = {1.0, 0.0, 0.0};
    p.length = {600.0, 0.0};
    p.tcp_window = {16384.0, 0.0};
    p.endpoint_pool = 2;
    p.port_pool = 4;
    p.regimes = std::move(regimes);
    p.regime_packets = 100;
    p.regime_jitter = 25.0;
    return p;
}

ClassProfile window_only(std::string label, Gaussian window) {
    return make_profile(std::move(label), 200.0, {0.85, 0.12, 0.03}, {600.0, 250.0}, window, 6, 12,
                        0.0005);
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"mic_on_off", "mic_on_noise", "utility_media_travel", "bursty_2",
            "bursty_3",   "window_only_2", "window_only_3"};
}

ScenarioPreset scenario_preset(std::string_view name) {
    if (name == "mic_on_off") {
        return {Scenario::MicOnOff,
                {make_profile("mic_off", 180.0, {0.88, 0.10, 0.02}, {420.0, 200.0},
                              {14000.0, 3000.0}, 5, 10, 0.0),
                 make_profile("mic_on", 220.0, {0.80, 0.17, 0.03}, {610.0, 260.0},
                              {22000.0, 4500.0}, 7, 14, 0.0)}};
    }
    if (name == "mic_on_noise") {
        return {Scenario::MicOnNoise,
                {make_profile("mic_on_quiet", 200.0, {0.84, 0.13, 0.03}, {520.0, 230.0},
                              {18000.0, 3500.0}, 6, 12, 0.0),
                 make_profile("mic_on_noise", 250.0, {0.76, 0.21, 0.03}, {700.0, 300.0},
                              {25000.0, 5000.0}, 8, 16, 0.0)}};
    }
    if (name == "utility_media_travel") {
        return {Scenario::UtilityMediaTravel,
                {make_profile("utility", 170.0, {0.80, 0.17, 0.03}, {320.0, 180.0},
                              {12000.0, 3000.0}, 6, 10, 0.0),
                 make_profile("media", 240.0, {0.90, 0.09, 0.01}, {900.0, 420.0},
                              {29000.0, 6000.0}, 4, 6, 0.0),
                 make_profile("travel", 200.0, {0.70, 0.27, 0.03}, {560.0, 260.0},
                              {20000.0, 4500.0}, 8, 14, 0.0)}};
    }
    const std::vector<LengthRegime> alternating{{0.5, 500.0}, {0.5, 700.0}};
    const std::vector<LengthRegime> spiky{{0.75, 600.0}, {0.125, 400.0}, {0.125, 800.0}};
    const std::vector<LengthRegime> stepped{
        {0.3125, 550.0}, {0.3125, 650.0}, {0.1875, 450.0}, {0.1875, 750.0}};
    if (name == "bursty_2") {
        return {Scenario::Custom, {bursty("alternating", alternating), bursty("spiky", spiky)}};
    }
    if (name == "bursty_3") {
        return {Scenario::Custom,
                {bursty("alternating", alternating), bursty("spiky", spiky),
                 bursty("stepped", stepped)}};
    }
    if (name == "window_only_2") {
        return {Scenario::Custom,
                {window_only("narrow", {8192.0, 2048.0}), window_only("wide", {30000.0, 7000.0})}};
    }
    if (name == "window_only_3") {
        return {Scenario::Custom,
                {window_only("narrow", {8192.0, 2048.0}), window_only("medium", {24576.0, 5000.0}),
                 window_only("wide", {45000.0, 9000.0})}};
    }
    throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
}

void write_trace(std::ostream& out, const Trace& trace) {
    out << "# tpb-trace 1\n";
    out << "# label=" << trace.label << '\n';
    out << "# scenario=" << to_string(trace.scenario) << '\n';
    for (const auto& p : trace.packets) {
        out << csv::format_double(p.timestamp) << ',' << p.length << ',' << to_string(p.protocol) << ',' << p.src_ip << ','
            << p.dst_ip << ',' << p.src_port << ',' << p.dst_port << ',' << p.tcp_window << '\n';
    }
}

namespace {

template <typename Int>
Int parse_uint(const std::string& field, std::size_t line_no, const char* name, std::uint64_t max) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(field, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != field.size() || field[0] == '-' || v > max)
        throw DataError("line " + std::to_string(line_no) + ": bad " + name + " '" + field + "'");
    return static_cast<Int>(v);
}

}  // namespace

Trace read_trace(std::istream& in) {
    Trace trace;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(1, eq - 1);
            key.erase(0, key.find_first_not_of(' '));
            const std::string value = line.substr(eq + 1);
            if (key == "label") trace.label = value;
            else if (key == "scenario") trace.scenario = scenario_from_string(value);
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 8)
            throw DataError("line " + std::to_string(line_no) + ": expected 8 fields, got " +
                            std::to_string(fields.size()));
        PacketRecord p;
        std::size_t pos = 0;
        try {
            p.timestamp = std::stod(fields[0], &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != fields[0].size())
            throw DataError("line " + std::to_string(line_no) + ": bad timestamp '" + fields[0] + "'");
        p.length = parse_uint<std::uint32_t>(fields[1], line_no, "length", 0xffffffffULL);
        try {
            p.protocol = protocol_from_string(fields[2]);
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        }
        p.src_ip = parse_uint<std::uint32_t>(fields[3], line_no, "src_ip", 0xffffffffULL);
        p.dst_ip = parse_uint<std::uint32_t>(fields[4], line_no, "dst_ip", 0xffffffffULL);
        p.src_port = parse_uint<std::uint16_t>(fields[5], line_no, "src_port", 65535);
        p.dst_port = parse_uint<std::uint16_t>(fields[6], line_no, "dst_port", 65535);
        p.tcp_window = parse_uint<std::uint16_t>(fields[7], line_no, "tcp_window", 65535);
        trace.packets.push_back(p);
    }
    validate(trace);
    return trace;
}

}  // namespace tpb
