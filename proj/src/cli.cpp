#include "tpb/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tpb/csv.hpp"
#include "tpb/error.hpp"
#include "tpb/harness.hpp"
#include "tpb/pcap.hpp"

namespace tpb {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

FeatureTable read_table_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open feature file '" + path.string() + "': file not found or unreadable");
    return read_feature_csv(in);
}

// Writes to `path`, or to `out` when the path is empty or "-".
template <class Write>
void emit(const std::string& path, std::ostream& out, Write write) {
    if (path.empty() || path == "-") {
        write(out);
        return;
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot write '" + path + "'");
    write(file);
    file.close();
    if (!file) throw DataError("error while writing '" + path + "'");
}

struct ManifestEntry {
    std::string trace_id;
    std::string label;
    fs::path path;
};

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest '" + path.string() + "': file not found or unreadable");
    std::vector<ManifestEntry> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = csv::split(line);
        if (lineno == 1 && !fields.empty() && fields[0] == "trace_id") continue;
        if (fields.size() != 3)
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected trace_id,label,path");
        out.push_back({fields[0], fields[1], path.parent_path() / fields[2]});
    }
    if (out.empty()) throw DataError("manifest '" + path.string() + "' lists no traces");
    return out;
}

Trace load_trace_file(const fs::path& path, const std::string& label, std::ostream& err) {
    const auto ext = path.extension().string();
    if (ext == ".pcap" || ext == ".cap") {
        auto parsed = read_pcap_file(path, label);
        if (parsed.stats.truncated_records)
            err << "warning: " << path.string() << ": truncated record, kept " << parsed.stats.records
                << " packet(s)\n";
        if (parsed.stats.reordered)
            err << "warning: " << path.string() << ": " << parsed.stats.reordered
                << " out-of-order record(s) sorted by timestamp\n";
        return std::move(parsed.trace);
    }
    std::ifstream in(path);
    if (!in) throw DataError("cannot open trace file '" + path.string() + "': file not found or unreadable");
    Trace t = read_trace(in);
    if (!label.empty()) t.label = label;
    return t;
}

// {"kind": kind, key: value, ...} from "key=value" strings; values parse as JSON when they can.
std::string classifier_json(const std::string& kind, const std::vector<std::string>& settings) {
    nlohmann::ordered_json j;
    j["kind"] = kind;
    for (const auto& s : settings) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
        const auto key = s.substr(0, eq);
        const auto value = s.substr(eq + 1);
        auto parsed = nlohmann::ordered_json::parse(value, nullptr, false);
        j[key] = parsed.is_discarded() ? nlohmann::ordered_json(value) : parsed;
    }
    return j.dump();
}

int cmd_synth(const std::string& preset, const std::string& config_path, std::optional<std::size_t> traces_per_class,
              std::optional<double> duration, std::optional<std::uint64_t> seed, const std::string& out_dir,
              const std::string& format, std::ostream& out) {
    if (preset.empty() == config_path.empty()) throw UsageError("synth: give exactly one of --preset or --config");
    SyntheticSource source;
    std::uint64_t master = 0;
    if (!config_path.empty()) {
        const auto cfg = load_config(config_path);
        const auto* s = std::get_if<SyntheticSource>(&cfg.source);
        if (!s) throw ConfigError(config_path + ": source: synth needs a synthetic source");
        source = *s;
        master = cfg.seed;
    } else {
        const auto p = scenario_preset(preset);
        source.preset = preset;
        source.scenario = p.scenario;
        source.profiles = p.profiles;
    }
    if (traces_per_class) source.traces_per_class = *traces_per_class;
    if (duration) source.duration = *duration;
    if (seed) master = *seed;
    if (source.traces_per_class < 1) throw UsageError("--traces-per-class must be at least 1");
    if (!(source.duration > 0.0)) throw UsageError("--duration must be positive");

    const auto traces = load_traces(source, master);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw DataError("cannot create output directory '" + out_dir + "': " + ec.message());
    std::ostringstream manifest;
    manifest << "trace_id,label,path\n";
    std::map<std::string, std::size_t> seen;
    for (const auto& t : traces) {
        const auto id = synthetic_trace_id(t.label, seen[t.label]++);
        const std::string name = id + (format == "pcap" ? ".pcap" : ".trace");
        const fs::path path = fs::path(out_dir) / name;
        if (format == "pcap") {
            write_pcap_file(path, t);
        } else {
            emit(path.string(), out, [&](std::ostream& o) { write_trace(o, t); });
        }
        manifest << csv::escape(id) << ',' << csv::escape(t.label) << ',' << csv::escape(name) << '\n';
    }
    const auto manifest_path = (fs::path(out_dir) / "manifest.csv").string();
    emit(manifest_path, out, [&](std::ostream& o) { o << manifest.str(); });
    out << "wrote " << traces.size() << " traces and " << manifest_path << '\n';
    return kExitOk;
}

int cmd_extract(const std::vector<std::string>& pcaps, const std::vector<std::string>& traces_in,
                const std::string& manifest, const std::string& label, std::optional<std::size_t> burst,
                std::optional<double> dt, const std::string& out_path, std::ostream& out, std::ostream& err) {
    if (burst.has_value() == dt.has_value()) throw UsageError("extract: give exactly one of --burst or --dt");
    if (pcaps.empty() && traces_in.empty() && manifest.empty())
        throw UsageError("extract: no input (use --pcap, --trace or --manifest)");
    WindowSpec spec = WindowSpec::burst(2);
    try {
        spec = burst ? WindowSpec::burst(*burst) : WindowSpec::time_span(*dt);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    std::vector<Trace> traces;
    std::vector<std::string> ids;
    for (const auto& p : pcaps) {
        const fs::path path(p);
        traces.push_back(load_trace_file(path, label.empty() ? path.stem().string() : label, err));
        ids.push_back(path.filename().string());
    }
    for (const auto& p : traces_in) {
        const fs::path path(p);
        traces.push_back(load_trace_file(path, label, err));
        ids.push_back(path.filename().string());
    }
    if (!manifest.empty()) {
        for (const auto& e : read_manifest(manifest)) {
            traces.push_back(load_trace_file(e.path, e.label, err));
            ids.push_back(e.trace_id);
        }
    }
    const auto extracted = extract_table(traces, ids, spec);
    if (extracted.dropped_windows)
        err << "note: dropped " << extracted.dropped_windows << " window(s) with fewer than 2 packets\n";
    emit(out_path, out, [&](std::ostream& o) { write_feature_csv(o, extracted.table); });
    return kExitOk;
}

struct PerturbOptions {
    std::string in, out, mode, features;
    double nu = 1.0;
    std::uint64_t seed = 0;
    std::size_t window = SavGolSpec{}.window_length;
    std::size_t degree = SavGolSpec{}.poly_degree;
    bool clamp_counts = false;
    bool nu_given = false;
};

int cmd_perturb(const PerturbOptions& o, std::ostream& out) {
    AdversarialSpec spec;
    const auto need_nu = [&] {
        if (!o.nu_given) throw UsageError("perturb: --mode " + o.mode + " requires --nu");
    };
    if (o.mode == "none") {
        spec = NoTransform{};
    } else if (o.mode == "smooth") {
        spec = SavGolSpec{o.window, o.degree};
    } else if (o.mode == "awgn") {
        need_nu();
        AwgnSpec a{o.nu, o.seed, kAllFeaturesMask, o.clamp_counts};
        if (!o.features.empty()) {
            a.mask = {};
            std::istringstream names(o.features);
            for (std::string name; std::getline(names, name, ',');) {
                const auto f = feature_from_name(name);
                if (!f) throw UsageError("perturb: unknown feature '" + name + "'");
                a.mask[index_of(*f)] = true;
            }
        }
        spec = a;
    } else if (o.mode == "realistic") {
        need_nu();
        spec = RealisticSpec{o.nu, o.seed, o.clamp_counts};
    } else {
        throw UsageError("perturb: unknown mode '" + o.mode + "' (expected none, smooth, awgn or realistic)");
    }
    std::visit(
        [](const auto& s) {
            if constexpr (!std::is_same_v<std::decay_t<decltype(s)>, NoTransform>) {
                try {
                    s.validate();
                } catch (const std::invalid_argument& e) {
                    throw UsageError(e.what());
                }
            }
        },
        spec);
    const auto table = read_table_file(o.in);
    const auto result = apply_transform(table, spec);
    emit(o.out, out, [&](std::ostream& s) { write_feature_csv(s, result); });
    return kExitOk;
}

struct AttackOptions {
    std::string in, test, classifier, model_out;
    std::vector<std::string> settings;
    std::uint64_t seed = 0;
    double train_fraction = SplitSpec{}.train_fraction;
};

int cmd_attack(const AttackOptions& o, std::ostream& out) {
    ClassifierSpec spec;
    try {
        spec = parse_classifier(classifier_json(o.classifier, o.settings));
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }
    spec = with_seed(spec, o.seed);
    const FeatureTable table = read_table_file(o.in);

    Dataset train, test;
    if (o.test.empty()) {
        const Dataset data = make_dataset(table);
        SplitSpec s{o.train_fraction, o.seed};
        try {
            s.validate();
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        auto parts = split(data, s);
        train = std::move(parts.train);
        test = std::move(parts.test);
    } else {
        train = make_dataset(table);
        test = make_dataset(read_table_file(o.test));
    }
    if (train.classes.size() < 2) throw DataError("attack: training data holds a single class");
    const TrainedModel model = train_model(train, spec);
    const double accuracy = evaluate(model, test);
    if (!o.model_out.empty()) emit(o.model_out, out, [&](std::ostream& s) { save_model(s, model); });
    out << "accuracy=" << csv::format_double(accuracy) << " n_train=" << train.size() << " n_test=" << test.size()
        << '\n';
    return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir, bool quiet, std::ostream& out,
              std::ostream& err) {
    auto cfg = load_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    const auto report = run_experiment(cfg, quiet ? nullptr : &err);
    std::size_t skipped = 0, failed = 0;
    for (const auto& r : report.rows) {
        if (r.status == CellStatus::Skipped) ++skipped;
        if (r.status == CellStatus::Failed) ++failed;
    }
    for (const auto& f : emit_report(report, cfg.output_dir)) out << "wrote " << f.string() << '\n';
    out << report.rows.size() << " cells: " << report.rows.size() - skipped - failed << " ok, " << skipped
        << " skipped, " << failed << " failed\n";
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Traffic-privacy benchmark: synthetic traffic, windowed features, adversarial transforms, attackers",
                 "tpb"};
    app.require_subcommand(1);

    std::string preset, config_path, out_dir, format = "trace";
    std::optional<std::size_t> traces_per_class;
    std::optional<double> duration;
    std::optional<std::uint64_t> synth_seed;
    auto* synth = app.add_subcommand("synth", "Generate a labelled synthetic trace corpus");
    synth->add_option("--preset", preset, "Scenario preset")->check(CLI::IsMember(preset_names()));
    synth->add_option("--config", config_path, "Take the synthetic source and seed from a sweep config");
    synth->add_option("--traces-per-class", traces_per_class, "Traces per class");
    synth->add_option("--duration", duration, "Seconds per trace");
    synth->add_option("--seed", synth_seed, "Master seed");
    synth->add_option("--out", out_dir, "Output directory")->required();
    synth->add_option("--format", format, "Trace file format")->check(CLI::IsMember({"trace", "pcap"}));

    std::vector<std::string> pcaps, trace_files;
    std::string manifest, label, extract_out;
    std::optional<std::size_t> burst;
    std::optional<double> dt;
    auto* extract = app.add_subcommand("extract", "Windowed features from captures or traces");
    extract->add_option("--pcap", pcaps, "pcap file (repeatable)");
    extract->add_option("--trace", trace_files, "Trace text file (repeatable)");
    extract->add_option("--manifest", manifest, "Manifest CSV written by synth");
    extract->add_option("--label", label, "Label for --pcap/--trace inputs");
    extract->add_option("--burst", burst, "Burst window size in packets");
    extract->add_option("--dt", dt, "Time-span window in seconds");
    extract->add_option("--out", extract_out, "Feature CSV (default: stdout)");

    PerturbOptions po;
    auto* perturb = app.add_subcommand("perturb", "Apply an adversarial transform to a feature CSV");
    perturb->add_option("--in", po.in, "Input feature CSV")->required();
    perturb->add_option("--mode", po.mode, "none, smooth, awgn or realistic")->required();
    auto* nu_opt = perturb->add_option("--nu", po.nu, "Noise variance multiplier");
    perturb->add_option("--seed", po.seed, "Noise seed");
    perturb->add_option("--window", po.window, "Smoothing window length (odd)");
    perturb->add_option("--degree", po.degree, "Smoothing polynomial degree");
    perturb->add_option("--features", po.features, "Comma-separated features to perturb (awgn)");
    perturb->add_flag("--clamp-counts", po.clamp_counts, "Floor noisy count features at 0");
    perturb->add_option("--out", po.out, "Output feature CSV (default: stdout)");

    AttackOptions ao;
    auto* attack = app.add_subcommand("attack", "Train a classifier on a feature CSV and report accuracy");
    attack->add_option("--in", ao.in, "Feature CSV")->required();
    attack->add_option("--test", ao.test, "Separate test CSV (default: stratified split of --in)");
    attack->add_option("--classifier", ao.classifier, "knn, tree, forest, adaboost or mlp")->required();
    attack->add_option("--set", ao.settings, "Hyperparameter key=value (repeatable)");
    attack->add_option("--seed", ao.seed, "Split and model seed");
    attack->add_option("--train-fraction", ao.train_fraction, "Training share per class");
    attack->add_option("--model-out", ao.model_out, "Save the trained model as JSON");

    std::string sweep_config, sweep_out;
    bool quiet = false;
    auto* sweep = app.add_subcommand("sweep", "Run a full experiment grid from a JSON config");
    sweep->add_option("--config", sweep_config, "Experiment config")->required();
    sweep->add_option("--out", sweep_out, "Override the config's output directory");
    sweep->add_flag("--quiet", quiet, "No per-cell progress");

    auto* selftest = app.add_subcommand("selftest", "Run the built-in invariant checks");

    std::vector<const char*> argv{"tpb"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*synth) return cmd_synth(preset, config_path, traces_per_class, duration, synth_seed, out_dir, format, out);
        if (*extract)
            return cmd_extract(pcaps, trace_files, manifest, label, burst, dt, extract_out, out, err);
        if (*perturb) {
            po.nu_given = nu_opt->count() > 0;
            return cmd_perturb(po, out);
        }
        if (*attack) return cmd_attack(ao, out);
        if (*sweep) return cmd_sweep(sweep_config, sweep_out, quiet, out, err);
        if (*selftest) return run_selftest(out) ? kExitOk : kExitData;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace tpb
