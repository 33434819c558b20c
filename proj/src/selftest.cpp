#include <cmath>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>

#include "tpb/adversarial.hpp"
#include "tpb/classifiers.hpp"
#include "tpb/cli.hpp"
#include "tpb/pcap.hpp"
#include "tpb/seed.hpp"

namespace tpb {

namespace {

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

bool check_savgol() {
    const auto c = savgol_coefficients({5, 2});
    const double expect[] = {-3.0, 12.0, 17.0, 12.0, -3.0};
    for (std::size_t i = 0; i < 5; ++i)
        if (!close(c[i], expect[i] / 35.0, 1e-12)) return false;
    // a cubic survives a degree-3 fit at every interior point
    std::vector<double> col(40);
    for (std::size_t i = 0; i < col.size(); ++i) {
        const double x = static_cast<double>(i) / 7.0;
        col[i] = 1.0 - 2.0 * x + 0.5 * x * x * x;
    }
    const auto coefs = savgol_coefficients({11, 3});
    const auto out = savgol_filter(col, coefs);
    for (std::size_t i = 5; i + 5 < col.size(); ++i)
        if (!close(out[i], col[i], 1e-9)) return false;
    return true;
}

FeatureSeries random_series(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(10.0, 3.0);
    FeatureSeries s;
    s.label = "x";
    for (std::size_t i = 0; i < n; ++i) {
        FeatureVector v;
        for (double& x : v.values) x = g(rng);
        s.vectors.push_back(v);
    }
    return s;
}

bool check_awgn() {
    const std::size_t n = 100000;
    auto s = random_series(n, 1);
    AwgnSpec spec{2.0, 7, {}, false};
    spec.mask[index_of(Feature::mean_ipt)] = true;
    const auto noisy = inject_awgn(s, spec);
    const auto before = column(s.vectors, Feature::mean_ipt);
    const auto after = column(noisy.vectors, Feature::mean_ipt);
    const double mean0 = std::accumulate(before.begin(), before.end(), 0.0) / n;
    double var0 = 0.0;
    for (double x : before) var0 += (x - mean0) * (x - mean0);
    var0 /= n;
    std::vector<double> e(n);
    for (std::size_t i = 0; i < n; ++i) e[i] = after[i] - before[i];
    const double m = std::accumulate(e.begin(), e.end(), 0.0) / n;
    double v = 0.0, lag = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += (e[i] - m) * (e[i] - m);
    for (std::size_t i = 0; i + 1 < n; ++i) lag += (e[i] - m) * (e[i + 1] - m);
    v /= n;
    const double rho = lag / (v * n);
    const bool stats = std::abs(m) <= 3.0 * std::sqrt(2.0 * var0 / n) && std::abs(v / (2.0 * var0) - 1.0) < 0.05 &&
                       std::abs(rho) < 0.02;
    for (auto f : kAllFeatures)
        if (f != Feature::mean_ipt && column(noisy.vectors, f) != column(s.vectors, f)) return false;
    return stats;
}

bool check_realistic() {
    const auto s = random_series(300, 2);
    const auto r = apply_realistic(s, {2.0, 11, false});
    for (auto f : kAllFeatures) {
        const auto a = column(s.vectors, f);
        const auto b = column(r.vectors, f);
        switch (realistic_treatment(f)) {
            case Treatment::None:
                if (a != b) return false;
                break;
            case Treatment::Awgn:
                if (a == b) return false;
                break;
            case Treatment::ConstantPadding: {
                const double peak = *std::max_element(a.begin(), a.end());
                for (double x : b)
                    if (x != peak) return false;
                break;
            }
            case Treatment::SetToZero:
                for (double x : b)
                    if (x != 0.0) return false;
                break;
        }
    }
    return true;
}

bool check_features() {
    Trace t;
    t.label = "x";
    t.packets = {
        {0.0, 100, Protocol::TCP, 1, 2, 1000, 80, 1000},
        {0.5, 200, Protocol::UDP, 2, 3, 53, 2000, 0},
        {1.5, 300, Protocol::ICMP, 1, 2, 0, 0, 0},
    };
    const auto f = compute_features(t, {0, 3});
    if (!f) return false;
    const double expect[kFeatureCount] = {3, 4, 1, 1, 1, 1.0, 1000, 0, 0.75, 0.25, 200, std::sqrt(20000.0 / 3.0)};
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        if (!close(f->values[i], expect[i], 1e-12)) return false;
    return !compute_features(t, {1, 2}) && window_packets(t, WindowSpec::burst(2)).size() == 1;
}

Dataset blobs(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Dataset d;
    d.classes = {"a", "b"};
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t y = i % 2;
        const double c = y ? 4.0 : -4.0;
        const double row[3] = {c + g(rng), c + g(rng), g(rng)};
        d.x.push_row(row);
        d.y.push_back(y);
    }
    return d;
}

bool check_classifiers() {
    const auto d = blobs(60, 3);
    const auto knn = train_knn(d, {1});
    const auto tree = train_tree(d, {});
    for (std::size_t i = 0; i < d.size(); ++i)
        if (knn.predict(d.x.row(i)) != d.y[i] || tree.predict(d.x.row(i)) != d.y[i]) return false;
    const auto f1 = train_forest(d, {10, 0, 5, true, {}});
    const auto f2 = train_forest(d, {10, 0, 5, true, {}});
    for (std::size_t i = 0; i < d.size(); ++i)
        if (f1.votes(d.x.row(i)) != f2.votes(d.x.row(i))) return false;
    return close(samme_alpha(0.2, 2), std::log(4.0), 1e-12);
}

bool check_mlp_gradient() {
    const auto d = blobs(3, 4);
    MlpParams p;
    p.hidden = {5, 4};
    p.seed = 9;
    auto model = init_mlp(d.features(), 2, p);
    const auto grads = mlp_loss_gradients(model, d.x, d.y);
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto& w = model.layers[l].weights;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double saved = w[i];
            w[i] = saved + h;
            const double up = mlp_loss_gradients(model, d.x, d.y).loss;
            w[i] = saved - h;
            const double down = mlp_loss_gradients(model, d.x, d.y).loss;
            w[i] = saved;
            const double numeric = (up - down) / (2 * h);
            const double analytic = grads.layers[l].weights[i];
            const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
            worst = std::max(worst, std::abs(numeric - analytic) / scale);
        }
    }
    return worst < 1e-4;
}

bool check_pcap() {
    Trace t;
    t.label = "x";
    t.packets = {
        {0.0, 60, Protocol::TCP, 0x0A000001, 0x0A000002, 40000, 443, 29200},
        {0.25, 80, Protocol::UDP, 0x0A000002, 0x0A000001, 53, 40001, 0},
        {1.000001, 98, Protocol::ICMP, 0x0A000001, 0x08080808, 0, 0, 0},
    };
    for (bool ns : {false, true}) {
        for (bool big : {false, true}) {
            const auto bytes = encode_pcap(t, ns, big);
            const auto r = parse_pcap(bytes, "x");
            if (r.trace.packets != t.packets || r.header.swapped != big || r.header.nanosecond != ns) return false;
            const auto cut = parse_pcap(std::span(bytes).first(bytes.size() - 3), "x");
            if (cut.stats.truncated_records != 1 || cut.trace.packets.size() != 2) return false;
        }
    }
    return true;
}

bool check_generator() {
    const auto p = scenario_preset("utility_media_travel").profiles.front();
    const auto a = generate_trace(p, 5.0, 42);
    const auto b = generate_trace(p, 5.0, 42);
    if (a.packets != b.packets || a.packets.empty()) return false;
    try {
        validate(a);
    } catch (...) {
        return false;
    }
    return true;
}

}  // namespace

bool run_selftest(std::ostream& out) {
    const std::pair<const char*, std::function<bool()>> checks[] = {
        {"savgol coefficients and polynomial reproduction", check_savgol},
        {"awgn noise statistics and mask", check_awgn},
        {"realistic transform column contract", check_realistic},
        {"window features on a hand-computed trace", check_features},
        {"knn/tree/forest training fit and determinism", check_classifiers},
        {"mlp gradients vs finite differences", check_mlp_gradient},
        {"pcap encode/parse round trip and truncation", check_pcap},
        {"generator determinism and trace invariants", check_generator},
    };
    bool all = true;
    for (const auto& [name, check] : checks) {
        bool ok = false;
        try {
            ok = check();
        } catch (const std::exception& e) {
            out << "  exception: " << e.what() << '\n';
        }
        out << (ok ? "PASS " : "FAIL ") << name << '\n';
        all = all && ok;
    }
    return all;
}

}  // namespace tpb
