#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "tpb/features.hpp"

using namespace tpb;

namespace {

constexpr std::uint32_t A = 1, B = 2, C = 3;

Trace three_packets() {
    Trace t;
    t.label = "x";
    t.packets = {
        {0.0, 100, Protocol::TCP, A, B, 4000, 443, 512},
        {0.5, 200, Protocol::TCP, A, B, 4000, 443, 256},
        {2.0, 300, Protocol::UDP, A, C, 5000, 53, 0},
    };
    return t;
}

Trace uniform_trace(std::size_t n, double spacing) {
    Trace t;
    t.label = "u";
    for (std::size_t i = 0; i < n; ++i)
        t.packets.push_back({static_cast<double>(i) * spacing, 100, Protocol::TCP, A, B, 1, 2, 1000});
    return t;
}

}  // namespace

TEST_CASE("hand-computed three-packet window") {
    const auto t = three_packets();
    const auto f = compute_features(t, {0, 3});
    REQUIRE(f);
    const auto& v = *f;
    CHECK(v[Feature::n_ip_unique] == 3);
    CHECK(v[Feature::n_port_unique] == 4);
    CHECK(v[Feature::n_pack_tcp] == 2);
    CHECK(v[Feature::n_pack_udp] == 1);
    CHECK(v[Feature::n_pack_icmp] == 0);
    CHECK(v[Feature::max_diff_time] == 1.5);
    CHECK(v[Feature::mean_ipt] == 1.0);
    CHECK(v[Feature::std_ipt] == 0.5);
    CHECK(v[Feature::mean_window] == 384);
    CHECK(v[Feature::std_window] == 128);
    CHECK(v[Feature::mean_len_pack] == 200);
    CHECK(v[Feature::std_len_pack] == doctest::Approx(81.6497).epsilon(1e-6));

    const auto o = oracle::window_features(t.packets);
    for (std::size_t i = 0; i < kFeatureCount; ++i) CHECK(oracle::rel_close(v.values[i], o[i], 1e-12));
}

TEST_CASE("identical packets: zero spreads, mean gap equals the gap") {
    const auto t = uniform_trace(20, 0.125);
    const auto f = compute_features(t, {0, 20});
    REQUIRE(f);
    CHECK((*f)[Feature::std_ipt] == 0.0);
    CHECK((*f)[Feature::std_window] == 0.0);
    CHECK((*f)[Feature::std_len_pack] == 0.0);
    CHECK((*f)[Feature::mean_ipt] == 0.125);
    CHECK((*f)[Feature::max_diff_time] == 0.125);
}

TEST_CASE("no TCP packets: zero window statistics") {
    Trace t;
    t.packets = {{0.0, 60, Protocol::UDP, A, B, 1, 2, 0}, {1.0, 70, Protocol::ICMP, A, B, 0, 0, 0}};
    const auto f = compute_features(t, {0, 2});
    REQUIRE(f);
    CHECK((*f)[Feature::n_pack_tcp] == 0);
    CHECK((*f)[Feature::mean_window] == 0);
    CHECK((*f)[Feature::std_window] == 0);
    CHECK((*f)[Feature::n_port_unique] == 2);
    CHECK((*f)[Feature::n_pack_icmp] == 1);
}

TEST_CASE("windows with fewer than two packets are rejected") {
    const auto t = three_packets();
    CHECK_FALSE(compute_features(t, {1, 2}));
    CHECK_FALSE(compute_features(t, {2, 2}));
    CHECK_THROWS(compute_features(t, {2, 5}));
}

TEST_CASE("burst windows") {
    const auto t = uniform_trace(1000, 0.01);
    const auto r = window_packets(t, WindowSpec::burst(300));
    REQUIRE(r.size() == 3);
    CHECK(r[0] == PacketRange{0, 300});
    CHECK(r[2] == PacketRange{600, 900});
    CHECK(window_packets(uniform_trace(500, 0.01), WindowSpec::burst(500)).size() == 1);
    CHECK(window_packets(uniform_trace(499, 0.01), WindowSpec::burst(500)).empty());
}

TEST_CASE("time-span windows skip empty intervals") {
    Trace t;
    for (double ts : {0.1, 0.2, 5.1}) t.packets.push_back({ts, 60, Protocol::UDP, A, B, 1, 2, 0});
    const auto r = window_packets(t, WindowSpec::time_span(1.0));
    REQUIRE(r.size() == 2);
    CHECK(r[0] == PacketRange{0, 2});
    CHECK(r[1] == PacketRange{2, 3});
    // second window has one packet and is dropped by extraction
    const auto s = extract_series(t, WindowSpec::time_span(1.0), "t");
    CHECK(s.vectors.size() == 1);
    CHECK(s.dropped_windows == 1);
}

TEST_CASE("window spec labels and validation") {
    CHECK(WindowSpec::burst(500).label() == "500");
    CHECK(WindowSpec::time_span(2.5).label() == "2.5s");
    CHECK(WindowSpec::parse("500") == WindowSpec::burst(500));
    CHECK(WindowSpec::parse("2.5s") == WindowSpec::time_span(2.5));
    CHECK_THROWS_AS(WindowSpec::burst(1), std::invalid_argument);
    CHECK_THROWS_AS(WindowSpec::time_span(0.0), std::invalid_argument);
    CHECK_THROWS_AS(WindowSpec::parse("abc"), std::invalid_argument);
}

TEST_CASE("extract_series composes windowing and features") {
    const auto t = generate_trace(scenario_preset("utility_media_travel").profiles[0], 30.0, 2);
    const auto spec = WindowSpec::burst(100);
    const auto s = extract_series(t, spec, "id");
    const auto ranges = window_packets(t, spec);
    REQUIRE(s.vectors.size() == ranges.size());
    for (std::size_t k = 0; k < ranges.size(); ++k) CHECK(s.vectors[k] == *compute_features(t, ranges[k]));
    CHECK(s.label == t.label);
    CHECK(s.trace_id == "id");
    CHECK(s.window_spec == spec);

    CHECK(extract_series(uniform_trace(1500, 0.01), WindowSpec::burst(500)).vectors.size() == 3);
    CHECK_THROWS_AS(extract_series(uniform_trace(10, 0.01), WindowSpec::burst(500)), EmptySeries);
}

TEST_CASE("class-separated profiles differ in mean features") {
    const auto preset = scenario_preset("utility_media_travel");
    std::vector<FeatureVector> means;
    for (const auto& p : preset.profiles) {
        const auto s = extract_series(generate_trace(p, 60.0, 3), WindowSpec::burst(250));
        FeatureVector m;
        for (const auto& v : s.vectors)
            for (std::size_t i = 0; i < kFeatureCount; ++i) m.values[i] += v.values[i] / s.vectors.size();
        means.push_back(m);
    }
    for (std::size_t a = 0; a < means.size(); ++a) {
        for (std::size_t b = a + 1; b < means.size(); ++b) {
            int differing = 0;
            for (std::size_t i = 0; i < kFeatureCount; ++i) {
                const double scale = std::max(std::abs(means[a].values[i]), std::abs(means[b].values[i]));
                if (scale > 0 && std::abs(means[a].values[i] - means[b].values[i]) > 0.1 * scale) ++differing;
            }
            CHECK(differing >= 3);
        }
    }
}

TEST_CASE("random traces agree with the brute-force oracle") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        Trace t;
        const std::size_t n = 2 + rng() % 49;
        double ts = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            ts += static_cast<double>(rng() % 100000) * 1e-6;
            const auto proto = static_cast<Protocol>(rng() % 4);
            PacketRecord p{ts, static_cast<std::uint32_t>(40 + rng() % 1475), proto,
                           static_cast<std::uint32_t>(rng() % 6), static_cast<std::uint32_t>(rng() % 6)};
            if (proto == Protocol::TCP || proto == Protocol::UDP) {
                p.src_port = static_cast<std::uint16_t>(rng() % 5);
                p.dst_port = static_cast<std::uint16_t>(rng() % 5);
            }
            if (proto == Protocol::TCP) p.tcp_window = static_cast<std::uint16_t>(rng() % 65536);
            t.packets.push_back(p);
        }
        const auto f = compute_features(t, {0, n});
        const auto o = oracle::window_features(t.packets);
        for (std::size_t i = 0; i < kFeatureCount; ++i) CHECK(oracle::rel_close(f->values[i], o[i], 1e-9));
    }
}

TEST_CASE("feature CSV round-trip") {
    const auto t = generate_trace(scenario_preset("mic_on_off").profiles[1], 20.0, 5);
    auto table = to_table(std::vector<FeatureSeries>{extract_series(t, WindowSpec::burst(50), "t0")});
    std::stringstream s;
    write_feature_csv(s, table);
    const auto header = s.str().substr(0, s.str().find('\n'));
    CHECK(header ==
          "n_ip_unique,n_port_unique,n_pack_tcp,n_pack_udp,n_pack_icmp,max_diff_time,mean_window,std_window,"
          "mean_ipt,std_ipt,mean_len_pack,std_len_pack,label,window_index,trace_id");
    const auto back = read_feature_csv(s);
    CHECK(back.vectors == table.vectors);
    CHECK(back.labels == table.labels);
    CHECK(back.window_index == table.window_index);
    CHECK(back.trace_ids == table.trace_ids);
    CHECK(back.transform.empty());

    table.transform = "awgn(nu=2;seed=1)";
    std::stringstream s2;
    write_feature_csv(s2, table);
    CHECK(read_feature_csv(s2).transform == table.transform);
}

TEST_CASE("feature CSV errors carry line numbers") {
    std::istringstream in(
        "n_ip_unique,n_port_unique,n_pack_tcp,n_pack_udp,n_pack_icmp,max_diff_time,mean_window,std_window,"
        "mean_ipt,std_ipt,mean_len_pack,std_len_pack,label,window_index,trace_id\n"
        "1,2,3,4,5,6,7,8,9,10,11,12,a,0,t\n"
        "1,2,3,x,5,6,7,8,9,10,11,12,a,1,t\n");
    try {
        read_feature_csv(in);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("feature names") {
    for (auto f : kAllFeatures) CHECK(feature_from_name(feature_name(f)) == f);
    CHECK_FALSE(feature_from_name("bogus"));
}
