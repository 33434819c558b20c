#include "tpb/features.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "tpb/csv.hpp"

namespace tpb {

namespace {

constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "n_ip_unique", "n_port_unique", "n_pack_tcp", "n_pack_udp",  "n_pack_icmp",   "max_diff_time",
    "mean_window", "std_window",    "mean_ipt",   "std_ipt",     "mean_len_pack", "std_len_pack"};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

// Two-pass population statistics; zeros for an empty sample.
template <typename Range, typename Proj>
MeanStd mean_std(const Range& values, Proj proj) {
    std::size_t n = 0;
    double sum = 0.0;
    for (const auto& v : values) {
        sum += proj(v);
        ++n;
    }
    if (n == 0) return {};
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& v : values) {
        const double d = proj(v) - mean;
        ss += d * d;
    }
    return {mean, std::sqrt(ss / static_cast<double>(n))};
}

}  // namespace

std::string_view feature_name(Feature f) noexcept { return kFeatureNames[index_of(f)]; }

std::optional<Feature> feature_from_name(std::string_view name) noexcept {
    for (auto f : kAllFeatures)
        if (feature_name(f) == name) return f;
    return std::nullopt;
}

WindowSpec WindowSpec::burst(std::size_t packets) {
    if (packets < 2) throw std::invalid_argument("burst windows need at least 2 packets");
    return WindowSpec(Mode::Burst, packets, 0.0);
}

WindowSpec WindowSpec::time_span(double seconds) {
    if (!(seconds > 0.0) || !std::isfinite(seconds))
        throw std::invalid_argument("time-span windows need a positive duration");
    return WindowSpec(Mode::TimeSpan, 0, seconds);
}

std::string WindowSpec::label() const {
    if (mode_ == Mode::Burst) return std::to_string(packets_);
    return csv::format_double(seconds_) + "s";
}

WindowSpec WindowSpec::parse(std::string_view label) {
    if (!label.empty() && label.back() == 's') {
        return time_span(csv::parse_double(label.substr(0, label.size() - 1)));
    }
    std::size_t n = 0;
    for (char c : label) {
        if (c < '0' || c > '9') throw std::invalid_argument("bad window label '" + std::string(label) + "'");
        n = n * 10 + static_cast<std::size_t>(c - '0');
    }
    if (label.empty()) throw std::invalid_argument("empty window label");
    return burst(n);
}

std::vector<PacketRange> window_packets(const Trace& trace, const WindowSpec& spec) {
    if (trace.packets.empty()) throw std::invalid_argument("window_packets: empty trace");
    std::vector<PacketRange> out;
    const std::size_t n = trace.packets.size();
    if (spec.mode() == WindowSpec::Mode::Burst) {
        const std::size_t size = spec.packets();
        for (std::size_t begin = 0; begin + size <= n; begin += size) out.push_back({begin, begin + size});
        return out;
    }
    const double dt = spec.seconds();
    const auto bucket = [&](std::size_t i) {
        return static_cast<std::int64_t>(std::floor(trace.packets[i].timestamp / dt));
    };
    std::size_t begin = 0;
    std::int64_t current = bucket(0);
    for (std::size_t i = 1; i < n; ++i) {
        const auto b = bucket(i);
        if (b != current) {
            out.push_back({begin, i});
            begin = i;
            current = b;
        }
    }
    out.push_back({begin, n});
    return out;
}

std::optional<FeatureVector> compute_features(const Trace& trace, PacketRange range) {
    if (range.end > trace.packets.size() || range.begin > range.end)
        throw std::out_of_range("compute_features: range outside trace");
    if (range.size() < 2) return std::nullopt;

    const std::span<const PacketRecord> packets(trace.packets.data() + range.begin, range.size());

    std::vector<std::uint32_t> ips;
    std::vector<std::uint16_t> ports;
    ips.reserve(packets.size() * 2);
    ports.reserve(packets.size() * 2);
    std::size_t tcp = 0, udp = 0, icmp = 0;
    for (const auto& p : packets) {
        ips.push_back(p.src_ip);
        ips.push_back(p.dst_ip);
        switch (p.protocol) {
            case Protocol::TCP: ++tcp; break;
            case Protocol::UDP: ++udp; break;
            case Protocol::ICMP: ++icmp; break;
            case Protocol::OTHER: break;
        }
        if (p.protocol == Protocol::TCP || p.protocol == Protocol::UDP) {
            if (p.src_port != 0) ports.push_back(p.src_port);
            if (p.dst_port != 0) ports.push_back(p.dst_port);
        }
    }
    const auto distinct = [](auto& v) {
        std::sort(v.begin(), v.end());
        return static_cast<double>(std::unique(v.begin(), v.end()) - v.begin());
    };

    std::vector<double> gaps(packets.size() - 1);
    for (std::size_t i = 0; i + 1 < packets.size(); ++i)
        gaps[i] = packets[i + 1].timestamp - packets[i].timestamp;
    const double max_gap = *std::max_element(gaps.begin(), gaps.end());
    const MeanStd ipt = mean_std(gaps, [](double d) { return d; });

    std::vector<double> windows;
    windows.reserve(tcp);
    for (const auto& p : packets)
        if (p.protocol == Protocol::TCP) windows.push_back(p.tcp_window);
    const MeanStd win = mean_std(windows, [](double w) { return w; });
    const MeanStd len = mean_std(packets, [](const PacketRecord& p) { return double(p.length); });

    FeatureVector f;
    f[Feature::n_ip_unique] = distinct(ips);
    f[Feature::n_port_unique] = distinct(ports);
    f[Feature::n_pack_tcp] = static_cast<double>(tcp);
    f[Feature::n_pack_udp] = static_cast<double>(udp);
    f[Feature::n_pack_icmp] = static_cast<double>(icmp);
    f[Feature::max_diff_time] = max_gap;
    f[Feature::mean_window] = win.mean;
    f[Feature::std_window] = win.std;
    f[Feature::mean_ipt] = std::min(ipt.mean, max_gap);
    f[Feature::std_ipt] = ipt.std;
    f[Feature::mean_len_pack] = len.mean;
    f[Feature::std_len_pack] = len.std;
    return f;
}

FeatureSeries extract_series(const Trace& trace, const WindowSpec& spec, std::string trace_id) {
    FeatureSeries series;
    series.label = trace.label;
    series.window_spec = spec;
    series.trace_id = std::move(trace_id);
    if (!trace.packets.empty()) {
        for (const auto& range : window_packets(trace, spec)) {
            if (auto f = compute_features(trace, range)) series.vectors.push_back(*f);
            else ++series.dropped_windows;
        }
    }
    if (series.vectors.empty())
        throw EmptySeries("trace '" + series.trace_id + "' yields no window with >= 2 packets at window " +
                          spec.label());
    return series;
}

void FeatureTable::append(const FeatureSeries& series) {
    for (std::size_t i = 0; i < series.vectors.size(); ++i) {
        vectors.push_back(series.vectors[i]);
        labels.push_back(series.label);
        window_index.push_back(i);
        trace_ids.push_back(series.trace_id);
    }
}

FeatureTable to_table(std::span<const FeatureSeries> series) {
    FeatureTable table;
    for (const auto& s : series) table.append(s);
    return table;
}

std::vector<double> column(std::span<const FeatureVector> vectors, Feature f) {
    std::vector<double> out;
    out.reserve(vectors.size());
    for (const auto& v : vectors) out.push_back(v[f]);
    return out;
}

void write_feature_csv(std::ostream& out, const FeatureTable& table) {
    const bool tagged = !table.transform.empty();
    for (auto f : kAllFeatures) out << feature_name(f) << ',';
    out << "label,window_index,trace_id";
    if (tagged) out << ",transform";
    out << '\n';
    for (std::size_t r = 0; r < table.size(); ++r) {
        for (double v : table.vectors[r].values) out << csv::format_double(v) << ',';
        out << csv::escape(table.labels[r]) << ',' << table.window_index[r] << ','
            << csv::escape(table.trace_ids[r]);
        if (tagged) out << ',' << csv::escape(table.transform);
        out << '\n';
    }
}

FeatureTable read_feature_csv(std::istream& in) {
    FeatureTable table;
    std::string line;
    std::size_t line_no = 0;
    const auto fail = [&](const std::string& what) -> DataError {
        return DataError("feature csv line " + std::to_string(line_no) + ": " + what);
    };

    if (!std::getline(in, line)) throw DataError("feature csv: missing header");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = csv::split(line);
    if (header.size() < kFeatureCount + 3) throw fail("header has too few columns");
    for (auto f : kAllFeatures)
        if (header[index_of(f)] != feature_name(f))
            throw fail("expected column '" + std::string(feature_name(f)) + "', got '" +
                       header[index_of(f)] + "'");
    if (header[12] != "label" || header[13] != "window_index" || header[14] != "trace_id")
        throw fail("expected label,window_index,trace_id after the feature columns");
    const bool tagged = header.size() == kFeatureCount + 4 && header[15] == "transform";
    if (header.size() != kFeatureCount + 3 && !tagged) throw fail("unexpected trailing columns");

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        try {
            fields = csv::split(line);
        } catch (const std::invalid_argument& e) {
            throw fail(e.what());
        }
        if (fields.size() != header.size())
            throw fail("expected " + std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
        FeatureVector v;
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            try {
                v.values[i] = csv::parse_double(fields[i]);
            } catch (const std::invalid_argument& e) {
                throw fail(std::string(kFeatureNames[i]) + ": " + e.what());
            }
        }
        std::size_t window = 0;
        try {
            std::size_t pos = 0;
            window = std::stoul(fields[13], &pos);
            if (pos != fields[13].size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw fail("bad window_index '" + fields[13] + "'");
        }
        table.vectors.push_back(v);
        table.labels.push_back(fields[12]);
        table.window_index.push_back(window);
        table.trace_ids.push_back(fields[14]);
        if (tagged) {
            if (table.size() == 1) table.transform = fields[15];
            else if (table.transform != fields[15]) throw fail("mixed transform tags in one file");
        }
    }
    return table;
}

}  // namespace tpb
