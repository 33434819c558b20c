#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tpb/classifiers.hpp"

namespace tpb {

KnnModel train_knn(const Dataset& train, const KnnParams& params) {
    if (params.k == 0) throw std::invalid_argument("kNN: k must be positive");
    if (params.k > train.size())
        throw std::invalid_argument("kNN: k = " + std::to_string(params.k) + " exceeds the " +
                                    std::to_string(train.size()) + " training rows");
    KnnModel m;
    m.k = params.k;
    m.n_classes = train.classes.size();
    m.x = train.x;
    m.y = train.y;
    return m;
}

std::size_t KnnModel::predict(std::span<const double> row) const {
    if (row.size() != x.cols()) throw std::invalid_argument("kNN: row width mismatch");
    const std::size_t n = x.rows();
    std::vector<double> dist(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto t = x.row(r);
        double s = 0.0;
        for (std::size_t c = 0; c < row.size(); ++c) {
            const double d = row[c] - t[c];
            s += d * d;
        }
        dist[r] = s;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto closer = [&](std::size_t a, std::size_t b) {
        return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
    };
    const std::size_t kk = std::min(k, n);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk), order.end(), closer);

    std::vector<std::size_t> votes(n_classes, 0);
    std::vector<double> summed(n_classes, 0.0);
    for (std::size_t i = 0; i < kk; ++i) {
        ++votes[y[order[i]]];
        summed[y[order[i]]] += std::sqrt(dist[order[i]]);
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < n_classes; ++c) {
        if (votes[c] > votes[best] || (votes[c] == votes[best] && summed[c] < summed[best])) best = c;
    }
    return best;
}

}  // namespace tpb
