#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tpb/features.hpp"

namespace tpb {

/// Savitzky–Golay smoothing parameters. window_length is odd and >= 3,
/// poly_degree < window_length.
struct SavGolSpec {
    std::size_t window_length = 51;
    std::size_t poly_degree = 1;

    void validate() const;  // throws std::invalid_argument
};

using FeatureMask = std::array<bool, kFeatureCount>;

inline constexpr FeatureMask kAllFeaturesMask{true, true, true, true, true, true,
                                              true, true, true, true, true, true};

/// Zero-mean Gaussian noise with variance nu times each column's variance.
struct AwgnSpec {
    double nu = 1.0;
    std::uint64_t seed = 0;
    FeatureMask mask = kAllFeaturesMask;
    bool clamp_counts = false;  // floor perturbed count features at 0

    void validate() const;
};

/// Constant padding of mean_len_pack, zeroed std_len_pack, and noise on the
/// features an egress middlebox can influence. Everything else is left alone.
struct RealisticSpec {
    double nu = 1.0;
    std::uint64_t seed = 0;
    bool clamp_counts = false;

    void validate() const;
};

struct NoTransform {};

using AdversarialSpec = std::variant<NoTransform, SavGolSpec, AwgnSpec, RealisticSpec>;

enum class Treatment { None, Awgn, ConstantPadding, SetToZero };

/// Per-feature treatment applied by the realistic transform.
inline constexpr std::array<Treatment, kFeatureCount> kRealisticTreatment{
    Treatment::None,             // n_ip_unique
    Treatment::Awgn,             // n_port_unique
    Treatment::Awgn,             // n_pack_tcp
    Treatment::Awgn,             // n_pack_udp
    Treatment::Awgn,             // n_pack_icmp
    Treatment::None,             // max_diff_time
    Treatment::None,             // mean_window
    Treatment::None,             // std_window
    Treatment::None,             // mean_ipt
    Treatment::Awgn,             // std_ipt
    Treatment::ConstantPadding,  // mean_len_pack
    Treatment::SetToZero,        // std_len_pack
};

constexpr Treatment realistic_treatment(Feature f) noexcept { return kRealisticTreatment[index_of(f)]; }

bool is_count_feature(Feature f) noexcept;

/// Central-point convolution weights of the least-squares polynomial fit.
std::vector<double> savgol_coefficients(const SavGolSpec& spec);

/// Convolves one column with `coefficients`, mirror-reflecting at both ends
/// (x[-k] = x[k], x[n-1+k] = x[n-1-k]). Throws SeriesTooShort when the column
/// is shorter than the window.
std::vector<double> savgol_filter(std::span<const double> column, std::span<const double> coefficients);

FeatureSeries smooth_series(const FeatureSeries& series, const SavGolSpec& spec);
FeatureSeries inject_awgn(const FeatureSeries& series, const AwgnSpec& spec);
FeatureSeries apply_realistic(const FeatureSeries& series, const RealisticSpec& spec);

// Table forms treat the rows, in order, as one feature time series.
FeatureTable smooth_series(const FeatureTable& table, const SavGolSpec& spec);
FeatureTable inject_awgn(const FeatureTable& table, const AwgnSpec& spec);
FeatureTable apply_realistic(const FeatureTable& table, const RealisticSpec& spec);

FeatureTable apply_transform(const FeatureTable& table, const AdversarialSpec& spec);

/// "none", "smooth", "awgn" or "realistic".
std::string transform_kind(const AdversarialSpec& spec);
/// Parameters without the seed, e.g. "window=51;degree=1" or "nu=2".
std::string transform_params(const AdversarialSpec& spec);
/// Kind plus parameters plus seed; stored in the CSV transform column.
std::string transform_tag(const AdversarialSpec& spec);

/// Same spec with its noise seed replaced (no-op for seedless transforms).
AdversarialSpec with_seed(AdversarialSpec spec, std::uint64_t seed);

}  // namespace tpb
