#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tpb/error.hpp"
#include "tpb/traffic_model.hpp"

namespace tpb {

inline constexpr std::size_t kFeatureCount = 12;

/// The per-window statistical indicators, in canonical column order.
enum class Feature : std::size_t {
    n_ip_unique,
    n_port_unique,
    n_pack_tcp,
    n_pack_udp,
    n_pack_icmp,
    max_diff_time,
    mean_window,
    std_window,
    mean_ipt,
    std_ipt,
    mean_len_pack,
    std_len_pack,
};

inline constexpr std::array<Feature, kFeatureCount> kAllFeatures{
    Feature::n_ip_unique,   Feature::n_port_unique, Feature::n_pack_tcp,  Feature::n_pack_udp,
    Feature::n_pack_icmp,   Feature::max_diff_time, Feature::mean_window, Feature::std_window,
    Feature::mean_ipt,      Feature::std_ipt,       Feature::mean_len_pack, Feature::std_len_pack};

std::string_view feature_name(Feature f) noexcept;
std::optional<Feature> feature_from_name(std::string_view name) noexcept;
constexpr std::size_t index_of(Feature f) noexcept { return static_cast<std::size_t>(f); }

struct FeatureVector {
    std::array<double, kFeatureCount> values{};

    double& operator[](Feature f) noexcept { return values[index_of(f)]; }
    double operator[](Feature f) const noexcept { return values[index_of(f)]; }

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Either fixed time spans of `span` seconds or bursts of `packets` packets.
class WindowSpec {
public:
    enum class Mode { TimeSpan, Burst };

    static WindowSpec burst(std::size_t packets);  // packets >= 2
    static WindowSpec time_span(double seconds);   // seconds > 0

    Mode mode() const noexcept { return mode_; }
    std::size_t packets() const noexcept { return packets_; }
    double seconds() const noexcept { return seconds_; }

    /// "500" for bursts, "2.5s" for time spans.
    std::string label() const;
    static WindowSpec parse(std::string_view label);  // inverse of label(); throws std::invalid_argument

    friend bool operator==(const WindowSpec&, const WindowSpec&) = default;

private:
    WindowSpec(Mode mode, std::size_t packets, double seconds)
        : mode_(mode), packets_(packets), seconds_(seconds) {}

    Mode mode_;
    std::size_t packets_;
    double seconds_;
};

/// Half-open packet index range [begin, end).
struct PacketRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
    friend bool operator==(const PacketRange&, const PacketRange&) = default;
};

/// Burst: consecutive ranges of exactly N packets, trailing remainder dropped.
/// TimeSpan: packets grouped by floor(t / dt); empty intervals do not appear.
std::vector<PacketRange> window_packets(const Trace& trace, const WindowSpec& spec);

/// Statistics of one window. Returns nullopt when the range holds fewer than
/// two packets (inter-packet times are undefined). Standard deviations use
/// the population convention.
std::optional<FeatureVector> compute_features(const Trace& trace, PacketRange range);

struct FeatureSeries {
    std::vector<FeatureVector> vectors;
    std::string label;
    WindowSpec window_spec = WindowSpec::burst(2);
    std::string trace_id;
    std::size_t dropped_windows = 0;
};

class EmptySeries : public DataError {
public:
    using DataError::DataError;
};

/// One FeatureVector per retained window, in window order. Throws EmptySeries
/// when no window has at least two packets.
FeatureSeries extract_series(const Trace& trace, const WindowSpec& spec, std::string trace_id = {});

/// Windows of many traces, one row each, with per-row metadata. This is the
/// shape of the feature CSV and of the datasets the attackers train on.
struct FeatureTable {
    std::vector<FeatureVector> vectors;
    std::vector<std::string> labels;
    std::vector<std::size_t> window_index;
    std::vector<std::string> trace_ids;
    std::string transform;  // empty for clean features

    std::size_t size() const noexcept { return vectors.size(); }
    bool empty() const noexcept { return vectors.empty(); }
    void append(const FeatureSeries& series);
};

FeatureTable to_table(std::span<const FeatureSeries> series);

std::vector<double> column(std::span<const FeatureVector> vectors, Feature f);

/// CSV with the twelve feature names, label, window_index, trace_id and, when
/// the table carries a transform tag, a trailing transform column. Doubles are
/// written in shortest round-trip form.
void write_feature_csv(std::ostream& out, const FeatureTable& table);
FeatureTable read_feature_csv(std::istream& in);  // throws DataError with line numbers

}  // namespace tpb
