#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "oracles.hpp"
#include "tpb/adversarial.hpp"
#include "tpb/classifiers.hpp"
#include "tpb/pcap.hpp"

using namespace tpb;

namespace {

ClassProfile random_profile(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ClassProfile p;
    p.label = "r";
    p.packet_rate = 5.0 + 300.0 * u(rng);
    const double a = u(rng), b = u(rng) * (1 - a);
    p.protocol_mix = {a, b, 1.0 - a - b};
    p.length = {40.0 + 1500.0 * u(rng), 400.0 * u(rng)};
    p.tcp_window = {70000.0 * u(rng), 9000.0 * u(rng)};
    p.endpoint_pool = 1 + rng() % 12;
    p.port_pool = 1 + rng() % 20;
    p.ipt_jitter_std = u(rng) < 0.5 ? 0.0 : 0.01 * u(rng);
    p.timing = u(rng) < 0.8 ? Timing::Poisson : Timing::Periodic;
    if (u(rng) < 0.3) {
        p.regimes = {{1.0, 200.0}, {2.0, 900.0}};
        p.regime_packets = 1 + rng() % 30;
        p.regime_jitter = 50.0 * u(rng);
    }
    return p;
}

Trace random_trace(std::mt19937_64& rng, std::size_t n) {
    Trace t;
    t.label = "x";
    double ts = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ts += static_cast<double>(rng() % 5000) * 1e-6;
        PacketRecord p{ts, static_cast<std::uint32_t>(40 + rng() % 1475), static_cast<Protocol>(rng() % 4),
                       static_cast<std::uint32_t>(rng() % 8), static_cast<std::uint32_t>(rng() % 8)};
        if (p.protocol == Protocol::TCP || p.protocol == Protocol::UDP) {
            p.src_port = static_cast<std::uint16_t>(rng() % 10);
            p.dst_port = static_cast<std::uint16_t>(rng() % 10);
        }
        if (p.protocol == Protocol::TCP) p.tcp_window = static_cast<std::uint16_t>(rng());
        t.packets.push_back(p);
    }
    return t;
}

}  // namespace

TEST_CASE("generated traces satisfy every invariant for random profiles") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 60; ++i) {
        const auto p = random_profile(rng);
        const auto t = generate_trace(p, 3.0, rng());
        CHECK_NOTHROW(validate(t));
        std::set<std::uint32_t> ips;
        for (const auto& pk : t.packets) {
            ips.insert(pk.src_ip);
            ips.insert(pk.dst_ip);
        }
        CHECK(ips.size() <= p.endpoint_pool);
    }
}

TEST_CASE("features at extraction time are well-formed") {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 300; ++i) {
        const auto t = random_trace(rng, 2 + rng() % 60);
        const auto f = *compute_features(t, {0, t.packets.size()});
        for (auto c : {Feature::n_ip_unique, Feature::n_port_unique, Feature::n_pack_tcp, Feature::n_pack_udp,
                       Feature::n_pack_icmp}) {
            CHECK(f[c] >= 0.0);
            CHECK(f[c] == std::floor(f[c]));
        }
        for (auto c : {Feature::std_window, Feature::std_ipt, Feature::std_len_pack}) CHECK(f[c] >= 0.0);
        CHECK(f[Feature::max_diff_time] >= 0.0);
        CHECK(f[Feature::mean_ipt] <= f[Feature::max_diff_time]);
    }
}

TEST_CASE("features are invariant under IP and port relabelling") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
        auto t = random_trace(rng, 2 + rng() % 50);
        const auto before = *compute_features(t, {0, t.packets.size()});
        std::map<std::uint32_t, std::uint32_t> ip_map;
        std::map<std::uint16_t, std::uint16_t> port_map{{0, 0}};
        for (auto& p : t.packets) {
            for (auto* ip : {&p.src_ip, &p.dst_ip}) {
                if (!ip_map.count(*ip)) ip_map[*ip] = 1000 + static_cast<std::uint32_t>(ip_map.size()) * 7919;
                *ip = ip_map[*ip];
            }
            for (auto* port : {&p.src_port, &p.dst_port}) {
                if (!port_map.count(*port)) port_map[*port] = static_cast<std::uint16_t>(60000 - port_map.size());
                *port = port_map[*port];
            }
        }
        CHECK(*compute_features(t, {0, t.packets.size()}) == before);
    }
}

TEST_CASE("adding a packet never decreases protocol counts or distinct IPs") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 100; ++i) {
        const auto t = random_trace(rng, 3 + rng() % 50);
        const auto n = t.packets.size();
        const auto smaller = *compute_features(t, {0, n - 1});
        const auto larger = *compute_features(t, {0, n});
        for (auto c : {Feature::n_ip_unique, Feature::n_pack_tcp, Feature::n_pack_udp, Feature::n_pack_icmp,
                       Feature::n_port_unique})
            CHECK(larger[c] >= smaller[c]);
    }
}

TEST_CASE("extraction agrees with the oracle window by window") {
    std::mt19937_64 rng(5);
    const auto t = random_trace(rng, 5000);
    for (const auto& spec : {WindowSpec::burst(37), WindowSpec::time_span(0.05)}) {
        const auto s = extract_series(t, spec);
        std::size_t k = 0;
        for (const auto& r : window_packets(t, spec)) {
            if (r.size() < 2) continue;
            const auto o = oracle::window_features(std::span(t.packets).subspan(r.begin, r.size()));
            for (std::size_t c = 0; c < kFeatureCount; ++c) CHECK(oracle::rel_close(s.vectors[k].values[c], o[c], 1e-9));
            ++k;
        }
        CHECK(k == s.vectors.size());
    }
}

TEST_CASE("time-span windows partition the trace into half-open intervals") {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 50; ++i) {
        const auto t = random_trace(rng, 1 + rng() % 200);
        const double dt = 0.001 * (1 + rng() % 50);
        const auto ranges = window_packets(t, WindowSpec::time_span(dt));
        std::size_t covered = 0;
        for (const auto& r : ranges) {
            CHECK(r.size() > 0);
            CHECK(r.begin == covered);
            covered = r.end;
            const auto bucket = std::floor(t.packets[r.begin].timestamp / dt);
            for (std::size_t j = r.begin; j < r.end; ++j) CHECK(std::floor(t.packets[j].timestamp / dt) == bucket);
        }
        CHECK(covered == t.packets.size());
    }
}

TEST_CASE("random polynomials survive smoothing at interior points") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 40; ++i) {
        const std::size_t w = 5 + 2 * (rng() % 24);
        const std::size_t d = rng() % std::min<std::size_t>(10, w);
        std::vector<double> coef(d + 1);
        for (double& c : coef) c = u(rng);
        std::vector<double> col(w + 40);
        for (std::size_t k = 0; k < col.size(); ++k) {
            const double x = static_cast<double>(k) / static_cast<double>(col.size());
            double y = 0.0;
            for (std::size_t j = coef.size(); j-- > 0;) y = y * x + coef[j];
            col[k] = y;
        }
        const auto out = savgol_filter(col, savgol_coefficients({w, d}));
        for (std::size_t k = w / 2; k + w / 2 < col.size(); ++k) CHECK(std::abs(out[k] - col[k]) < 1e-9);
    }
}

TEST_CASE("transforms never touch metadata or length") {
    std::mt19937_64 rng(8);
    FeatureTable table;
    for (int tr = 0; tr < 3; ++tr) {
        auto t = random_trace(rng, 3000);
        t.label = "c" + std::to_string(tr);
        table.append(extract_series(t, WindowSpec::burst(40), "t" + std::to_string(tr)));
    }
    for (const AdversarialSpec& spec :
         {AdversarialSpec{SavGolSpec{51, 3}}, AdversarialSpec{AwgnSpec{64.0, 1, kAllFeaturesMask, true}},
          AdversarialSpec{RealisticSpec{0.2, 2, false}}}) {
        const auto out = apply_transform(table, spec);
        CHECK(out.size() == table.size());
        CHECK(out.labels == table.labels);
        CHECK(out.trace_ids == table.trace_ids);
        CHECK(out.window_index == table.window_index);
        CHECK(out.transform == transform_tag(spec));
    }
}

TEST_CASE("pcap round trip for random traces") {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 40; ++i) {
        auto t = random_trace(rng, 1 + rng() % 100);
        for (auto& p : t.packets) {
            if (p.protocol == Protocol::OTHER) p.src_ip = p.dst_ip = 0;
            p.timestamp = std::round(p.timestamp * 1e6) / 1e6;
        }
        // rebase: the parser puts the first packet at zero
        const double t0 = t.packets.front().timestamp;
        for (auto& p : t.packets) p.timestamp = std::round((p.timestamp - t0) * 1e6) / 1e6;
        const bool ns = rng() % 2, big = rng() % 2;
        CHECK(parse_pcap(encode_pcap(t, ns, big), "x").trace.packets == t.packets);
    }
}

TEST_CASE("stratified split invariants") {
    std::mt19937_64 rng(10);
    for (int i = 0; i < 50; ++i) {
        Dataset d;
        const std::size_t k = 2 + rng() % 4;
        for (std::size_t c = 0; c < k; ++c) d.classes.push_back(std::to_string(c));
        for (std::size_t c = 0; c < k; ++c) {
            const std::size_t n = 2 + rng() % 40;
            for (std::size_t j = 0; j < n; ++j) {
                const double row[1] = {static_cast<double>(rng() % 100)};
                d.x.push_row(row);
                d.y.push_back(c);
            }
        }
        const double fraction = 0.1 + 0.8 * static_cast<double>(rng() % 100) / 100.0;
        const auto s = split(d, {fraction, rng()});
        CHECK(s.train.size() + s.test.size() == d.size());
        for (std::size_t c = 0; c < k; ++c) {
            const auto tr = static_cast<double>(std::count(s.train.y.begin(), s.train.y.end(), c));
            const auto te = static_cast<double>(std::count(s.test.y.begin(), s.test.y.end(), c));
            CHECK(tr >= 1);
            CHECK(te >= 1);
            CHECK(std::abs(tr - fraction * (tr + te)) <= 1.0);
        }
    }
}

TEST_CASE("learners are deterministic functions of data, parameters and seed") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    Dataset d;
    d.classes = {"a", "b", "c"};
    for (int i = 0; i < 90; ++i) {
        const double row[3] = {g(rng) + (i % 3), g(rng), g(rng) - (i % 3)};
        d.x.push_row(row);
        d.y.push_back(i % 3);
    }
    ForestParams fp;
    fp.n_trees = 15;
    fp.seed = 4;
    MlpParams mp;
    mp.hidden = {8};
    mp.epochs = 20;
    mp.seed = 4;
    const auto f1 = train_forest(d, fp), f2 = train_forest(d, fp);
    const auto a1 = train_adaboost(d, {10}), a2 = train_adaboost(d, {10});
    const auto m1 = train_mlp(d, mp), m2 = train_mlp(d, mp);
    const auto t1 = train_tree(d), t2 = train_tree(d);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto r = d.x.row(i);
        CHECK(f1.votes(r) == f2.votes(r));
        CHECK(a1.scores(r) == a2.scores(r));
        CHECK(m1.probabilities(r) == m2.probabilities(r));
        CHECK(t1.predict(r) == t2.predict(r));
    }
    CHECK(a1.alphas == a2.alphas);
}
