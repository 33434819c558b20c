#include "tpb/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "tpb/csv.hpp"
#include "tpb/error.hpp"
#include "tpb/seed.hpp"

namespace tpb {

namespace {

void require_length(std::size_t n, const char* what) {
    if (n < 2)
        throw DataError(std::string(what) + " needs a series of at least 2 windows, got " +
                        std::to_string(n));
}

double population_variance(std::span<const FeatureVector> rows, std::size_t col) {
    double mean = 0.0;
    for (const auto& r : rows) mean += r.values[col];
    mean /= static_cast<double>(rows.size());
    double ss = 0.0;
    for (const auto& r : rows) {
        const double d = r.values[col] - mean;
        ss += d * d;
    }
    return ss / static_cast<double>(rows.size());
}

std::vector<FeatureVector> smooth_rows(std::span<const FeatureVector> rows, const SavGolSpec& spec) {
    spec.validate();
    if (rows.size() < spec.window_length) throw SeriesTooShort(rows.size(), spec.window_length);
    const auto coefficients = savgol_coefficients(spec);
    std::vector<FeatureVector> out(rows.begin(), rows.end());
    for (auto f : kAllFeatures) {
        const auto smoothed = savgol_filter(column(rows, f), coefficients);
        for (std::size_t i = 0; i < out.size(); ++i) out[i][f] = smoothed[i];
    }
    return out;
}

// Each column draws from its own stream so a column's noise does not depend
// on which other columns are masked in.
void add_noise(std::vector<FeatureVector>& rows, double nu, std::uint64_t seed, const FeatureMask& mask,
               bool clamp_counts) {
    for (auto f : kAllFeatures) {
        const std::size_t col = index_of(f);
        if (!mask[col]) continue;
        const double variance = population_variance(rows, col);
        if (!(variance > 0.0) || !std::isfinite(variance)) continue;
        std::mt19937_64 rng(derive_seed(seed, {fnv1a("awgn"), col}));
        std::normal_distribution<double> noise(0.0, std::sqrt(nu * variance));
        for (auto& r : rows) r.values[col] += noise(rng);
        if (clamp_counts && is_count_feature(f))
            for (auto& r : rows) r.values[col] = std::max(0.0, r.values[col]);
    }
}

std::vector<FeatureVector> awgn_rows(std::span<const FeatureVector> rows, const AwgnSpec& spec) {
    spec.validate();
    require_length(rows.size(), "AWGN injection");
    std::vector<FeatureVector> out(rows.begin(), rows.end());
    add_noise(out, spec.nu, spec.seed, spec.mask, spec.clamp_counts);
    return out;
}

std::vector<FeatureVector> realistic_rows(std::span<const FeatureVector> rows, const RealisticSpec& spec) {
    spec.validate();
    require_length(rows.size(), "realistic transform");
    std::vector<FeatureVector> out(rows.begin(), rows.end());
    FeatureMask noisy{};
    for (auto f : kAllFeatures) {
        const std::size_t col = index_of(f);
        switch (realistic_treatment(f)) {
            case Treatment::Awgn: noisy[col] = true; break;
            case Treatment::ConstantPadding: {
                double peak = -INFINITY;
                for (const auto& r : out) peak = std::max(peak, r.values[col]);
                for (auto& r : out) r.values[col] = peak;
                break;
            }
            case Treatment::SetToZero:
                for (auto& r : out) r.values[col] = 0.0;
                break;
            case Treatment::None: break;
        }
    }
    add_noise(out, spec.nu, spec.seed, noisy, spec.clamp_counts);
    return out;
}

template <typename Container, typename Fn>
Container transformed(const Container& in, Fn&& fn) {
    Container out = in;
    out.vectors = fn(in.vectors);
    return out;
}

}  // namespace

void SavGolSpec::validate() const {
    if (window_length < 3 || window_length % 2 == 0)
        throw std::invalid_argument("Savitzky-Golay window length must be odd and >= 3, got " +
                                    std::to_string(window_length));
    if (poly_degree >= window_length)
        throw std::invalid_argument("Savitzky-Golay degree " + std::to_string(poly_degree) +
                                    " must be below the window length " + std::to_string(window_length));
}

void AwgnSpec::validate() const {
    if (!(nu > 0.0) || !std::isfinite(nu)) throw std::invalid_argument("AWGN variance multiplier must be > 0");
}

void RealisticSpec::validate() const {
    if (!(nu > 0.0) || !std::isfinite(nu)) throw std::invalid_argument("AWGN variance multiplier must be > 0");
}

bool is_count_feature(Feature f) noexcept {
    switch (f) {
        case Feature::n_ip_unique:
        case Feature::n_port_unique:
        case Feature::n_pack_tcp:
        case Feature::n_pack_udp:
        case Feature::n_pack_icmp: return true;
        default: return false;
    }
}

// Builds an orthonormal basis of polynomials up to the requested degree on the
// window's sample points (Arnoldi on x, with re-orthogonalisation), then reads
// off the centre row of the projection onto that basis. Abscissae are scaled to
// [-1, 1], which leaves the fitted value at the centre unchanged.
std::vector<double> savgol_coefficients(const SavGolSpec& spec) {
    spec.validate();
    const std::size_t w = spec.window_length;
    const std::size_t m = (w - 1) / 2;
    std::vector<double> x(w);
    for (std::size_t i = 0; i < w; ++i)
        x[i] = (static_cast<double>(i) - static_cast<double>(m)) / static_cast<double>(m);

    std::vector<std::vector<double>> basis;
    basis.emplace_back(w, 1.0 / std::sqrt(static_cast<double>(w)));
    for (std::size_t k = 1; k <= spec.poly_degree; ++k) {
        std::vector<double> v(w);
        for (std::size_t i = 0; i < w; ++i) v[i] = x[i] * basis.back()[i];
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& q : basis) {
                double dot = 0.0;
                for (std::size_t i = 0; i < w; ++i) dot += q[i] * v[i];
                for (std::size_t i = 0; i < w; ++i) v[i] -= dot * q[i];
            }
        }
        double norm = 0.0;
        for (double e : v) norm += e * e;
        norm = std::sqrt(norm);
        for (double& e : v) e /= norm;
        basis.push_back(std::move(v));
    }

    std::vector<double> weights(w, 0.0);
    for (const auto& q : basis)
        for (std::size_t i = 0; i < w; ++i) weights[i] += q[m] * q[i];
    return weights;
}

std::vector<double> savgol_filter(std::span<const double> column, std::span<const double> coefficients) {
    const std::size_t w = coefficients.size();
    if (w == 0 || w % 2 == 0) throw std::invalid_argument("coefficient count must be odd");
    const std::size_t n = column.size();
    if (n < w) throw SeriesTooShort(n, w);
    const auto m = static_cast<std::ptrdiff_t>(w / 2);
    const auto last = static_cast<std::ptrdiff_t>(n) - 1;
    const auto reflect = [last](std::ptrdiff_t j) {
        if (j < 0) return -j;
        if (j > last) return 2 * last - j;
        return j;
    };
    std::vector<double> out(n);
    for (std::ptrdiff_t i = 0; i <= last; ++i) {
        double acc = 0.0;
        for (std::ptrdiff_t k = -m; k <= m; ++k)
            acc += coefficients[static_cast<std::size_t>(k + m)] *
                   column[static_cast<std::size_t>(reflect(i + k))];
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

FeatureSeries smooth_series(const FeatureSeries& series, const SavGolSpec& spec) {
    return transformed(series, [&](const auto& rows) { return smooth_rows(rows, spec); });
}

FeatureSeries inject_awgn(const FeatureSeries& series, const AwgnSpec& spec) {
    return transformed(series, [&](const auto& rows) { return awgn_rows(rows, spec); });
}

FeatureSeries apply_realistic(const FeatureSeries& series, const RealisticSpec& spec) {
    return transformed(series, [&](const auto& rows) { return realistic_rows(rows, spec); });
}

FeatureTable smooth_series(const FeatureTable& table, const SavGolSpec& spec) {
    auto out = transformed(table, [&](const auto& rows) { return smooth_rows(rows, spec); });
    out.transform = transform_tag(spec);
    return out;
}

FeatureTable inject_awgn(const FeatureTable& table, const AwgnSpec& spec) {
    auto out = transformed(table, [&](const auto& rows) { return awgn_rows(rows, spec); });
    out.transform = transform_tag(spec);
    return out;
}

FeatureTable apply_realistic(const FeatureTable& table, const RealisticSpec& spec) {
    auto out = transformed(table, [&](const auto& rows) { return realistic_rows(rows, spec); });
    out.transform = transform_tag(spec);
    return out;
}

FeatureTable apply_transform(const FeatureTable& table, const AdversarialSpec& spec) {
    return std::visit(
        [&](const auto& s) -> FeatureTable {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, NoTransform>) {
                FeatureTable out = table;
                out.transform = "none";
                return out;
            } else if constexpr (std::is_same_v<S, SavGolSpec>) {
                return smooth_series(table, s);
            } else if constexpr (std::is_same_v<S, AwgnSpec>) {
                return inject_awgn(table, s);
            } else {
                return apply_realistic(table, s);
            }
        },
        spec);
}

std::string transform_kind(const AdversarialSpec& spec) {
    static constexpr const char* kNames[] = {"none", "smooth", "awgn", "realistic"};
    return kNames[spec.index()];
}

std::string transform_params(const AdversarialSpec& spec) {
    return std::visit(
        [](const auto& s) -> std::string {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, NoTransform>) {
                return "";
            } else if constexpr (std::is_same_v<S, SavGolSpec>) {
                return "window=" + std::to_string(s.window_length) + ";degree=" + std::to_string(s.poly_degree);
            } else {
                std::string p = "nu=" + csv::format_double(s.nu);
                if constexpr (std::is_same_v<S, AwgnSpec>) {
                    if (s.mask != kAllFeaturesMask) {
                        p += ";mask=";
                        bool first = true;
                        for (auto f : kAllFeatures) {
                            if (!s.mask[index_of(f)]) continue;
                            if (!first) p += '+';
                            p += feature_name(f);
                            first = false;
                        }
                    }
                }
                if (s.clamp_counts) p += ";clamp_counts";
                return p;
            }
        },
        spec);
}

std::string transform_tag(const AdversarialSpec& spec) {
    std::string tag = transform_kind(spec);
    const std::string params = transform_params(spec);
    if (!params.empty()) tag += "(" + params + ")";
    if (const auto* a = std::get_if<AwgnSpec>(&spec)) tag += "@" + std::to_string(a->seed);
    if (const auto* r = std::get_if<RealisticSpec>(&spec)) tag += "@" + std::to_string(r->seed);
    return tag;
}

AdversarialSpec with_seed(AdversarialSpec spec, std::uint64_t seed) {
    if (auto* a = std::get_if<AwgnSpec>(&spec)) a->seed = seed;
    if (auto* r = std::get_if<RealisticSpec>(&spec)) r->seed = seed;
    return spec;
}

}  // namespace tpb
