#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "tpb/classifiers.hpp"

namespace tpb {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;

struct Activations {
    std::vector<std::vector<double>> pre;   // z per layer
    std::vector<std::vector<double>> post;  // a per layer; post[0] is the input
};

void forward(const MlpModel& model, std::span<const double> row, Activations& act) {
    act.pre.resize(model.layers.size());
    act.post.resize(model.layers.size() + 1);
    act.post[0].assign(row.begin(), row.end());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        auto& z = act.pre[l];
        z.assign(layer.bias.begin(), layer.bias.end());
        const auto& in = act.post[l];
        for (std::size_t o = 0; o < layer.outputs; ++o) {
            const double* w = layer.weights.data() + o * layer.inputs;
            double s = 0.0;
            for (std::size_t i = 0; i < layer.inputs; ++i) s += w[i] * in[i];
            z[o] += s;
        }
        auto& a = act.post[l + 1];
        if (l + 1 < model.layers.size()) {
            a.resize(z.size());
            for (std::size_t o = 0; o < z.size(); ++o) a[o] = z[o] < 0.0 ? 0.0 : z[o];  // NaN passes through
        } else {
            const double peak = *std::max_element(z.begin(), z.end());
            a.resize(z.size());
            double sum = 0.0;
            for (std::size_t o = 0; o < z.size(); ++o) sum += (a[o] = std::exp(z[o] - peak));
            for (double& p : a) p /= sum;
        }
    }
}

std::vector<DenseLayer> zeros_like(const std::vector<DenseLayer>& layers) {
    std::vector<DenseLayer> out;
    out.reserve(layers.size());
    for (const auto& l : layers)
        out.push_back({l.inputs, l.outputs, std::vector<double>(l.weights.size(), 0.0),
                       std::vector<double>(l.bias.size(), 0.0)});
    return out;
}

// Mean cross-entropy and its gradient over the given rows.
double accumulate_gradients(const MlpModel& model, const Matrix& x, std::span<const std::size_t> y,
                            std::span<const std::size_t> rows, std::vector<DenseLayer>& grads) {
    for (auto& g : grads) {
        std::fill(g.weights.begin(), g.weights.end(), 0.0);
        std::fill(g.bias.begin(), g.bias.end(), 0.0);
    }
    Activations act;
    std::vector<double> delta, prev_delta;
    double loss = 0.0;
    for (auto r : rows) {
        forward(model, x.row(r), act);
        const auto& probs = act.post.back();
        loss -= std::log(std::max(probs[y[r]], 1e-300));
        delta = probs;
        delta[y[r]] -= 1.0;
        for (std::size_t l = model.layers.size(); l-- > 0;) {
            const auto& layer = model.layers[l];
            auto& g = grads[l];
            const auto& in = act.post[l];
            for (std::size_t o = 0; o < layer.outputs; ++o) {
                const double d = delta[o];
                if (d == 0.0) continue;
                g.bias[o] += d;
                double* gw = g.weights.data() + o * layer.inputs;
                for (std::size_t i = 0; i < layer.inputs; ++i) gw[i] += d * in[i];
            }
            if (l == 0) break;
            prev_delta.assign(layer.inputs, 0.0);
            for (std::size_t o = 0; o < layer.outputs; ++o) {
                const double d = delta[o];
                if (d == 0.0) continue;
                const double* w = layer.weights.data() + o * layer.inputs;
                for (std::size_t i = 0; i < layer.inputs; ++i) prev_delta[i] += w[i] * d;
            }
            const auto& z_prev = act.pre[l - 1];
            for (std::size_t i = 0; i < layer.inputs; ++i)
                if (!(z_prev[i] > 0.0)) prev_delta[i] = 0.0;
            delta.swap(prev_delta);
        }
    }
    const double scale = 1.0 / static_cast<double>(rows.size());
    for (auto& g : grads) {
        for (double& v : g.weights) v *= scale;
        for (double& v : g.bias) v *= scale;
    }
    return loss * scale;
}

void adam_step(std::vector<double>& param, const std::vector<double>& grad, std::vector<double>& m,
               std::vector<double>& v, double lr, double correction1, double correction2) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * grad[i];
        v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
        const double m_hat = m[i] / correction1;
        const double v_hat = v[i] / correction2;
        param[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
    }
}

}  // namespace

std::vector<double> MlpModel::probabilities(std::span<const double> row) const {
    if (layers.empty()) throw std::logic_error("predict on an untrained MLP");
    if (row.size() != layers.front().inputs) throw std::invalid_argument("MLP: row width mismatch");
    Activations act;
    forward(*this, row, act);
    return act.post.back();
}

std::size_t MlpModel::predict(std::span<const double> row) const {
    const auto p = probabilities(row);
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

MlpModel init_mlp(std::size_t inputs, std::size_t classes, const MlpParams& params) {
    if (inputs == 0 || classes == 0) throw std::invalid_argument("MLP: empty input or output layer");
    std::mt19937_64 rng(params.seed);
    MlpModel model;
    model.n_classes = classes;
    std::vector<std::size_t> widths{inputs};
    widths.insert(widths.end(), params.hidden.begin(), params.hidden.end());
    widths.push_back(classes);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        if (widths[l + 1] == 0) throw std::invalid_argument("MLP: hidden layer of width 0");
        DenseLayer layer{widths[l], widths[l + 1], {}, std::vector<double>(widths[l + 1], 0.0)};
        const bool output = l + 2 == widths.size();
        const double bound = std::sqrt((output ? 3.0 : 6.0) / static_cast<double>(layer.inputs));
        std::uniform_real_distribution<double> init(-bound, bound);
        layer.weights.resize(layer.inputs * layer.outputs);
        for (double& w : layer.weights) w = init(rng);
        model.layers.push_back(std::move(layer));
    }
    return model;
}

MlpGradients mlp_loss_gradients(const MlpModel& model, const Matrix& x, std::span<const std::size_t> y) {
    if (x.rows() == 0 || x.rows() != y.size()) throw std::invalid_argument("MLP: bad batch");
    MlpGradients out;
    out.layers = zeros_like(model.layers);
    std::vector<std::size_t> rows(x.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    out.loss = accumulate_gradients(model, x, y, rows, out.layers);
    return out;
}

MlpModel train_mlp(const Dataset& train, const MlpParams& params) {
    if (train.size() == 0) throw std::invalid_argument("MLP: no training rows");
    if (params.batch == 0) throw std::invalid_argument("MLP: batch size must be positive");
    if (!(params.learning_rate > 0.0)) throw std::invalid_argument("MLP: learning rate must be positive");

    MlpModel model = init_mlp(train.features(), train.classes.size(), params);
    std::mt19937_64 rng(params.seed ^ 0x5bd1e995ULL);
    auto grads = zeros_like(model.layers);
    auto m_state = zeros_like(model.layers);
    auto v_state = zeros_like(model.layers);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t step = 0;
    model.loss_curve.reserve(params.epochs);
    for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += params.batch) {
            const std::size_t len = std::min(params.batch, order.size() - start);
            const std::span<const std::size_t> batch(order.data() + start, len);
            const double loss = accumulate_gradients(model, train.x, train.y, batch, grads);
            if (!std::isfinite(loss))
                throw std::runtime_error("MLP training diverged: non-finite loss at epoch " +
                                         std::to_string(epoch + 1));
            epoch_loss += loss * static_cast<double>(len);
            ++step;
            const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
            for (std::size_t l = 0; l < model.layers.size(); ++l) {
                adam_step(model.layers[l].weights, grads[l].weights, m_state[l].weights, v_state[l].weights,
                          params.learning_rate, c1, c2);
                adam_step(model.layers[l].bias, grads[l].bias, m_state[l].bias, v_state[l].bias,
                          params.learning_rate, c1, c2);
            }
        }
        model.loss_curve.push_back(epoch_loss / static_cast<double>(order.size()));
    }
    return model;
}

}  // namespace tpb
