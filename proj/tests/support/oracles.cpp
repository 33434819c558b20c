#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include <boost/multiprecision/cpp_int.hpp>

namespace oracle {

using boost::multiprecision::cpp_rational;

std::vector<double> savgol_weights(std::size_t window, std::size_t degree) {
    const long m = static_cast<long>(window / 2);
    const std::size_t p = degree + 1;
    // N = A^T A with A[i][j] = i^j; N[a][b] = sum_i i^(a+b)
    std::vector<std::vector<cpp_rational>> n(p, std::vector<cpp_rational>(p + 1));
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = 0; b < p; ++b) {
            cpp_rational s = 0;
            for (long i = -m; i <= m; ++i) {
                cpp_rational term = 1;
                for (std::size_t e = 0; e < a + b; ++e) term *= i;
                s += term;
            }
            n[a][b] = s;
        }
        n[a][p] = a == 0 ? 1 : 0;  // solve N z = e0; z is row 0 of N^-1
    }
    for (std::size_t col = 0; col < p; ++col) {
        std::size_t pivot = col;
        while (n[pivot][col] == 0) ++pivot;
        std::swap(n[pivot], n[col]);
        for (std::size_t r = 0; r < p; ++r) {
            if (r == col || n[r][col] == 0) continue;
            const cpp_rational f = n[r][col] / n[col][col];
            for (std::size_t c = col; c <= p; ++c) n[r][c] -= f * n[col][c];
        }
    }
    std::vector<double> w;
    for (long i = -m; i <= m; ++i) {
        cpp_rational s = 0, pow = 1;
        for (std::size_t j = 0; j < p; ++j) {
            s += n[j][p] / n[j][j] * pow;
            pow *= i;
        }
        w.push_back(static_cast<double>(s));
    }
    return w;
}

std::array<double, 12> window_features(std::span<const tpb::PacketRecord> packets) {
    if (packets.size() < 2) throw std::invalid_argument("oracle needs two packets");
    std::set<std::uint32_t> ips;
    std::set<std::uint16_t> ports;
    long double tcp = 0, udp = 0, icmp = 0;
    std::vector<long double> windows, lengths, gaps;
    for (std::size_t i = 0; i < packets.size(); ++i) {
        const auto& p = packets[i];
        ips.insert(p.src_ip);
        ips.insert(p.dst_ip);
        if (p.protocol == tpb::Protocol::TCP || p.protocol == tpb::Protocol::UDP) {
            for (auto port : {p.src_port, p.dst_port})
                if (port != 0) ports.insert(port);
        }
        if (p.protocol == tpb::Protocol::TCP) {
            tcp += 1;
            windows.push_back(p.tcp_window);
        }
        if (p.protocol == tpb::Protocol::UDP) udp += 1;
        if (p.protocol == tpb::Protocol::ICMP) icmp += 1;
        lengths.push_back(p.length);
        if (i > 0) gaps.push_back(static_cast<long double>(p.timestamp) - packets[i - 1].timestamp);
    }
    const auto mean = [](const std::vector<long double>& v) -> long double {
        if (v.empty()) return 0;
        long double s = 0;
        for (auto x : v) s += x;
        return s / v.size();
    };
    const auto pstd = [&](const std::vector<long double>& v) -> long double {
        if (v.empty()) return 0;
        const long double mu = mean(v);
        long double s = 0;
        for (auto x : v) s += (x - mu) * (x - mu);
        return std::sqrt(s / v.size());
    };
    const long double max_gap = *std::max_element(gaps.begin(), gaps.end());
    return {static_cast<double>(ips.size()), static_cast<double>(ports.size()), static_cast<double>(tcp),
            static_cast<double>(udp),        static_cast<double>(icmp),         static_cast<double>(max_gap),
            static_cast<double>(mean(windows)), static_cast<double>(pstd(windows)), static_cast<double>(mean(gaps)),
            static_cast<double>(pstd(gaps)), static_cast<double>(mean(lengths)), static_cast<double>(pstd(lengths))};
}

std::size_t knn_predict(const tpb::Matrix& x, const std::vector<std::size_t>& y, std::size_t n_classes,
                        std::span<const double> query, std::size_t k) {
    struct Cand {
        double dist;
        std::size_t index;
    };
    std::vector<Cand> all;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double s = 0;
        for (std::size_t c = 0; c < x.cols(); ++c) s += (x(r, c) - query[c]) * (x(r, c) - query[c]);
        all.push_back({s, r});
    }
    std::sort(all.begin(), all.end(), [](const Cand& a, const Cand& b) {
        return a.dist != b.dist ? a.dist < b.dist : a.index < b.index;
    });
    std::vector<std::size_t> votes(n_classes);
    std::vector<double> summed(n_classes);
    for (std::size_t i = 0; i < k && i < all.size(); ++i) {
        votes[y[all[i].index]]++;
        summed[y[all[i].index]] += std::sqrt(all[i].dist);
    }
    std::vector<std::size_t> order(n_classes);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (votes[a] != votes[b]) return votes[a] > votes[b];
        return summed[a] < summed[b];
    });
    return order.front();
}

bool rel_close(double a, double b, double rel, double abs_floor) {
    const double diff = std::abs(a - b);
    return diff <= abs_floor || diff <= rel * std::max(std::abs(a), std::abs(b));
}

}  // namespace oracle
