#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tpb/adversarial.hpp"
#include "tpb/dataset.hpp"
#include "tpb/features.hpp"
#include "tpb/model.hpp"
#include "tpb/traffic_model.hpp"

namespace tpb {

inline const std::vector<std::size_t> kDefaultBurstSizes{250, 500, 750, 1000, 1250, 1500};
/// Noise grid used when an awgn/realistic transform gives no "nu".
inline const std::vector<double> kDefaultNuGrid{0.2, 0.6, 1.0, 1.4, 2.0};

struct SyntheticSource {
    std::string preset;  // empty when profiles were given inline
    Scenario scenario = Scenario::Custom;
    std::vector<ClassProfile> profiles;
    std::size_t traces_per_class = 3;
    double duration = 300.0;  // seconds per trace
};

struct CaptureFile {
    std::filesystem::path path;
    std::string label;
};

/// Captures on disk: classic pcap files, or trace text files (any other extension).
struct CaptureSource {
    std::filesystem::path directory;
    std::vector<CaptureFile> files;  // paths resolved against `directory`
};

using DataSource = std::variant<SyntheticSource, CaptureSource>;

struct ExperimentConfig {
    std::string scenario;  // name written to the report
    DataSource source;
    std::vector<WindowSpec> windows;
    std::vector<AdversarialSpec> transforms;
    std::vector<ClassifierSpec> classifiers;
    SplitSpec split;  // seed ignored: every cell derives its own
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "results";
};

/// Parses JSON config text. Relative paths resolve against `base_dir`.
/// Throws ConfigError carrying "line:column" for syntax errors and the
/// field path (e.g. "transforms[2].nu") for semantic ones.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {},
                              std::string_view source_name = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

/// One classifier spec from a JSON object such as {"kind": "knn", "k": 3},
/// or a bare JSON string naming the kind.
ClassifierSpec parse_classifier(std::string_view json_text);

/// Loads every trace of the source in corpus order (synthetic: class-major).
std::vector<Trace> load_traces(const DataSource& source, std::uint64_t seed);
/// Identifier of trace `index` of class `label`, as used in feature tables.
std::string synthetic_trace_id(std::string_view label, std::size_t index);

/// Concatenates the windows of all traces in order. Traces yielding no
/// window are counted in `dropped_windows` but otherwise skipped.
struct ExtractedTable {
    FeatureTable table;
    std::size_t dropped_windows = 0;
};
ExtractedTable extract_table(std::span<const Trace> traces, std::span<const std::string> trace_ids,
                             const WindowSpec& spec);

/// Per-cell seeds; functions of the master seed and the cell's coordinates only.
std::uint64_t transform_seed(std::uint64_t master, const WindowSpec& window, const AdversarialSpec& transform);
std::uint64_t attack_seed(std::uint64_t master, const WindowSpec& window, const AdversarialSpec& transform,
                          const ClassifierSpec& classifier);

/// Outcome of one cell: split on `seed`, train with `seed`, evaluate.
struct AttackResult {
    double accuracy = 0.0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
};
AttackResult run_attack(const FeatureTable& table, const ClassifierSpec& classifier, const SplitSpec& split,
                        std::uint64_t seed);

enum class CellStatus { Ok, Skipped, Failed };
std::string_view to_string(CellStatus s) noexcept;

struct SweepRow {
    std::string scenario;
    std::string classifier;
    std::string classifier_params;
    std::string window_size;
    std::string transform;
    std::string transform_params;
    std::optional<double> accuracy;  // empty unless status is Ok
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::uint64_t seed = 0;
    std::uint64_t transform_seed = 0;
    std::size_t dropped_windows = 0;
    CellStatus status = CellStatus::Ok;
    std::string reason;
};

struct SweepReport {
    std::vector<SweepRow> rows;  // window-major, then transform, then classifier
};

/// Worker count from TPB_WORKERS (positive integer) or hardware concurrency.
std::size_t worker_count();

/// Runs every window x transform x classifier cell. Per-cell failures are
/// recorded in the report; `log`, when given, receives one progress line per cell.
SweepReport run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

void write_sweep_csv(std::ostream& out, const SweepReport& report);

/// Writes sweep.csv and the accuracy_vs_window_<transform>.csv pivots into
/// `dir`, creating it if needed. Returns the files written. Throws
/// std::invalid_argument on an empty report and DataError when unwritable.
std::vector<std::filesystem::path> emit_report(const SweepReport& report, const std::filesystem::path& dir);

}  // namespace tpb
