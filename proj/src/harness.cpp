#include "tpb/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "tpb/csv.hpp"
#include "tpb/error.hpp"
#include "tpb/pcap.hpp"
#include "tpb/seed.hpp"

namespace tpb {

using ojson = nlohmann::ordered_json;

namespace {

// ---- config reading -------------------------------------------------------

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw ConfigError((path.empty() ? std::string("config") : path) + ": " + message);
}

std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
}

std::string at_index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void check_keys(const ojson& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) != allowed.end()) continue;
        std::string list;
        for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
        fail(join(path, key), "unknown field (expected one of: " + list + ")");
    }
}

double as_number(const ojson& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
}

std::size_t as_count(const ojson& v, const std::string& path, std::size_t min = 0) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        fail(path, "expected a non-negative integer");
    const auto n = v.get<std::uint64_t>();
    if (n < min) fail(path, "must be at least " + std::to_string(min));
    return static_cast<std::size_t>(n);
}

std::string as_string(const ojson& v, const std::string& path) {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
}

bool as_bool(const ojson& v, const std::string& path) {
    if (!v.is_boolean()) fail(path, "expected true or false");
    return v.get<bool>();
}

// A scalar or an array of scalars; arrays expand into several settings.
template <class T, class Read>
std::vector<T> as_list(const ojson& v, const std::string& path, Read read) {
    std::vector<T> out;
    if (v.is_array()) {
        if (v.empty()) fail(path, "empty list");
        for (std::size_t i = 0; i < v.size(); ++i) out.push_back(read(v[i], at_index(path, i)));
    } else {
        out.push_back(read(v, path));
    }
    return out;
}

Gaussian parse_gaussian(const ojson& v, const std::string& path) {
    check_keys(v, path, {"mean", "std"});
    Gaussian g;
    if (v.contains("mean")) g.mean = as_number(v["mean"], join(path, "mean"));
    if (v.contains("std")) g.std = as_number(v["std"], join(path, "std"));
    return g;
}

ClassProfile parse_profile(const ojson& v, const std::string& path) {
    check_keys(v, path,
               {"label", "packet_rate", "protocol_mix", "length", "tcp_window", "endpoint_pool", "port_pool",
                "ipt_jitter_std", "timing", "regimes", "regime_packets", "regime_jitter"});
    ClassProfile p;
    if (!v.contains("label")) fail(join(path, "label"), "required");
    p.label = as_string(v["label"], join(path, "label"));
    if (v.contains("packet_rate")) p.packet_rate = as_number(v["packet_rate"], join(path, "packet_rate"));
    if (v.contains("protocol_mix")) {
        const auto& mix = v["protocol_mix"];
        const auto mp = join(path, "protocol_mix");
        if (!mix.is_array() || mix.size() != 3) fail(mp, "expected [tcp, udp, icmp]");
        for (std::size_t i = 0; i < 3; ++i) p.protocol_mix[i] = as_number(mix[i], at_index(mp, i));
    }
    if (v.contains("length")) p.length = parse_gaussian(v["length"], join(path, "length"));
    if (v.contains("tcp_window")) p.tcp_window = parse_gaussian(v["tcp_window"], join(path, "tcp_window"));
    if (v.contains("endpoint_pool")) p.endpoint_pool = as_count(v["endpoint_pool"], join(path, "endpoint_pool"));
    if (v.contains("port_pool")) p.port_pool = as_count(v["port_pool"], join(path, "port_pool"));
    if (v.contains("ipt_jitter_std")) p.ipt_jitter_std = as_number(v["ipt_jitter_std"], join(path, "ipt_jitter_std"));
    if (v.contains("timing")) {
        const auto t = as_string(v["timing"], join(path, "timing"));
        if (t == "poisson") p.timing = Timing::Poisson;
        else if (t == "periodic") p.timing = Timing::Periodic;
        else fail(join(path, "timing"), "expected \"poisson\" or \"periodic\"");
    }
    if (v.contains("regimes")) {
        const auto rp = join(path, "regimes");
        if (!v["regimes"].is_array()) fail(rp, "expected a list");
        for (std::size_t i = 0; i < v["regimes"].size(); ++i) {
            const auto& r = v["regimes"][i];
            const auto ip = at_index(rp, i);
            check_keys(r, ip, {"weight", "length_mean"});
            LengthRegime regime;
            if (r.contains("weight")) regime.weight = as_number(r["weight"], join(ip, "weight"));
            if (!r.contains("length_mean")) fail(join(ip, "length_mean"), "required");
            regime.length_mean = as_number(r["length_mean"], join(ip, "length_mean"));
            p.regimes.push_back(regime);
        }
    }
    if (v.contains("regime_packets")) p.regime_packets = as_count(v["regime_packets"], join(path, "regime_packets"));
    if (v.contains("regime_jitter")) p.regime_jitter = as_number(v["regime_jitter"], join(path, "regime_jitter"));
    try {
        validate(p);
    } catch (const std::invalid_argument& e) {
        fail(path, e.what());
    }
    return p;
}

DataSource parse_source(const ojson& v, const std::string& path, const std::filesystem::path& base_dir,
                        std::string& default_scenario) {
    if (!v.is_object()) fail(path, "expected an object");
    if (!v.contains("type")) fail(join(path, "type"), "required (\"synthetic\" or \"captures\")");
    const auto type = as_string(v["type"], join(path, "type"));
    if (type == "synthetic") {
        check_keys(v, path, {"type", "preset", "profiles", "scenario", "traces_per_class", "duration"});
        SyntheticSource s;
        if (v.contains("preset") == v.contains("profiles")) fail(path, "give exactly one of \"preset\" or \"profiles\"");
        if (v.contains("preset")) {
            s.preset = as_string(v["preset"], join(path, "preset"));
            try {
                auto preset = scenario_preset(s.preset);
                s.scenario = preset.scenario;
                s.profiles = std::move(preset.profiles);
            } catch (const std::exception& e) {
                fail(join(path, "preset"), e.what());
            }
            default_scenario = s.preset;
        } else {
            const auto pp = join(path, "profiles");
            if (!v["profiles"].is_array() || v["profiles"].size() < 2) fail(pp, "expected a list of at least 2 profiles");
            for (std::size_t i = 0; i < v["profiles"].size(); ++i)
                s.profiles.push_back(parse_profile(v["profiles"][i], at_index(pp, i)));
            default_scenario = "custom";
        }
        if (v.contains("scenario")) {
            try {
                s.scenario = scenario_from_string(as_string(v["scenario"], join(path, "scenario")));
            } catch (const DataError& e) {
                fail(join(path, "scenario"), e.what());
            }
            const auto expected = scenario_class_count(s.scenario);
            if (expected != 0 && expected != s.profiles.size())
                fail(join(path, "scenario"), "scenario expects " + std::to_string(expected) + " classes, got " +
                                                 std::to_string(s.profiles.size()));
        }
        if (v.contains("traces_per_class"))
            s.traces_per_class = as_count(v["traces_per_class"], join(path, "traces_per_class"), 1);
        if (v.contains("duration")) {
            s.duration = as_number(v["duration"], join(path, "duration"));
            if (!(s.duration > 0.0)) fail(join(path, "duration"), "must be positive");
        }
        return s;
    }
    if (type == "captures" || type == "pcap") {
        check_keys(v, path, {"type", "directory", "labels"});
        CaptureSource s;
        s.directory = base_dir;
        if (v.contains("directory")) s.directory = base_dir / as_string(v["directory"], join(path, "directory"));
        const auto lp = join(path, "labels");
        if (!v.contains("labels") || !v["labels"].is_object() || v["labels"].empty())
            fail(lp, "expected a non-empty object mapping file names to labels");
        for (const auto& [file, label] : v["labels"].items()) {
            const auto fp = join(lp, file);
            CaptureFile f{s.directory / file, as_string(label, fp)};
            std::error_code ec;
            if (!std::filesystem::is_regular_file(f.path, ec)) fail(fp, "file not found: " + f.path.string());
            s.files.push_back(std::move(f));
        }
        default_scenario = "captures";
        return s;
    }
    fail(join(path, "type"), "unknown source type '" + type + "' (expected \"synthetic\" or \"captures\")");
}

std::vector<WindowSpec> parse_windows(const ojson& v, const std::string& path) {
    std::vector<WindowSpec> out;
    const auto burst = [&](const ojson& n, const std::string& p) {
        const auto size = as_count(n, p);
        if (size < 2) fail(p, "burst size must be at least 2");
        return WindowSpec::burst(size);
    };
    const auto span = [&](const ojson& n, const std::string& p) {
        const double s = as_number(n, p);
        if (!(s > 0.0)) fail(p, "time span must be positive");
        return WindowSpec::time_span(s);
    };
    if (v.is_array()) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto p = at_index(path, i);
            if (v[i].is_string()) {
                try {
                    out.push_back(WindowSpec::parse(v[i].get<std::string>()));
                } catch (const std::invalid_argument& e) {
                    fail(p, e.what());
                }
            } else {
                out.push_back(burst(v[i], p));
            }
        }
    } else if (v.is_object()) {
        check_keys(v, path, {"burst", "time_span"});
        if (v.contains("burst"))
            for (auto w : as_list<WindowSpec>(v["burst"], join(path, "burst"), burst)) out.push_back(w);
        if (v.contains("time_span"))
            for (auto w : as_list<WindowSpec>(v["time_span"], join(path, "time_span"), span)) out.push_back(w);
    } else {
        fail(path, "expected a list of window sizes or {\"burst\": [...], \"time_span\": [...]}");
    }
    if (out.empty()) fail(path, "window sweep is empty");
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (out[i] == out[j]) fail(path, "window " + out[i].label() + " listed twice");
    return out;
}

FeatureMask parse_mask(const ojson& v, const std::string& path) {
    if (!v.is_array() || v.empty()) fail(path, "expected a non-empty list of feature names");
    FeatureMask mask{};
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto name = as_string(v[i], at_index(path, i));
        const auto f = feature_from_name(name);
        if (!f) fail(at_index(path, i), "unknown feature '" + name + "'");
        mask[index_of(*f)] = true;
    }
    return mask;
}

std::vector<AdversarialSpec> parse_transform(const ojson& v, const std::string& path) {
    const ojson obj = v.is_string() ? ojson{{"mode", v}} : v;
    if (!obj.is_object()) fail(path, "expected a mode name or an object");
    if (!obj.contains("mode")) fail(join(path, "mode"), "required");
    const auto mode = as_string(obj["mode"], join(path, "mode"));
    std::vector<AdversarialSpec> out;
    const auto checked = [&](auto spec) {
        try {
            spec.validate();
        } catch (const std::invalid_argument& e) {
            fail(path, e.what());
        }
        out.emplace_back(spec);
    };
    const auto nu_list = [&] {
        if (!obj.contains("nu")) return kDefaultNuGrid;
        return as_list<double>(obj["nu"], join(path, "nu"), as_number);
    };
    if (mode == "none") {
        check_keys(obj, path, {"mode"});
        out.emplace_back(NoTransform{});
    } else if (mode == "smooth") {
        check_keys(obj, path, {"mode", "window", "degree"});
        std::vector<std::size_t> windows{SavGolSpec{}.window_length}, degrees{SavGolSpec{}.poly_degree};
        const auto count = [](const ojson& n, const std::string& p) { return as_count(n, p); };
        if (obj.contains("window")) windows = as_list<std::size_t>(obj["window"], join(path, "window"), count);
        if (obj.contains("degree")) degrees = as_list<std::size_t>(obj["degree"], join(path, "degree"), count);
        for (auto w : windows)
            for (auto d : degrees) checked(SavGolSpec{w, d});
    } else if (mode == "awgn") {
        check_keys(obj, path, {"mode", "nu", "features", "clamp_counts"});
        AwgnSpec base;
        if (obj.contains("features")) base.mask = parse_mask(obj["features"], join(path, "features"));
        if (obj.contains("clamp_counts")) base.clamp_counts = as_bool(obj["clamp_counts"], join(path, "clamp_counts"));
        for (double nu : nu_list()) {
            AwgnSpec s = base;
            s.nu = nu;
            checked(s);
        }
    } else if (mode == "realistic") {
        check_keys(obj, path, {"mode", "nu", "clamp_counts"});
        RealisticSpec base;
        if (obj.contains("clamp_counts")) base.clamp_counts = as_bool(obj["clamp_counts"], join(path, "clamp_counts"));
        for (double nu : nu_list()) {
            RealisticSpec s = base;
            s.nu = nu;
            checked(s);
        }
    } else {
        fail(join(path, "mode"), "unknown mode '" + mode + "' (expected none, smooth, awgn or realistic)");
    }
    return out;
}

ClassifierSpec parse_classifier_json(const ojson& v, const std::string& path) {
    const ojson obj = v.is_string() ? ojson{{"kind", v}} : v;
    if (!obj.is_object()) fail(path, "expected a classifier name or an object");
    if (!obj.contains("kind")) fail(join(path, "kind"), "required");
    ModelKind kind;
    try {
        kind = model_kind_from_string(as_string(obj["kind"], join(path, "kind")));
    } catch (const std::invalid_argument& e) {
        fail(join(path, "kind"), e.what());
    }
    ClassifierSpec spec = default_spec(kind);
    const auto count = [&](const char* key, std::size_t& target, std::size_t min) {
        if (obj.contains(key)) target = as_count(obj[key], join(path, key), min);
    };
    const auto tree_fields = [&](TreeParams& t) {
        count("max_depth", t.max_depth, 0);
        count("min_leaf", t.min_leaf, 1);
    };
    switch (kind) {
        case ModelKind::KNN:
            check_keys(obj, path, {"kind", "k"});
            count("k", std::get<KnnParams>(spec).k, 1);
            break;
        case ModelKind::DecisionTree:
            check_keys(obj, path, {"kind", "max_depth", "min_leaf"});
            tree_fields(std::get<TreeParams>(spec));
            break;
        case ModelKind::RandomForest: {
            check_keys(obj, path, {"kind", "n_trees", "features_per_split", "bootstrap", "max_depth", "min_leaf"});
            auto& f = std::get<ForestParams>(spec);
            count("n_trees", f.n_trees, 1);
            count("features_per_split", f.features_per_split, 0);
            if (obj.contains("bootstrap")) f.bootstrap = as_bool(obj["bootstrap"], join(path, "bootstrap"));
            tree_fields(f.tree);
            break;
        }
        case ModelKind::AdaBoost:
            check_keys(obj, path, {"kind", "rounds"});
            count("rounds", std::get<AdaBoostParams>(spec).rounds, 1);
            break;
        case ModelKind::MLP: {
            check_keys(obj, path, {"kind", "hidden", "epochs", "batch", "learning_rate"});
            auto& m = std::get<MlpParams>(spec);
            if (obj.contains("hidden")) {
                const auto hp = join(path, "hidden");
                if (!obj["hidden"].is_array()) fail(hp, "expected a list of layer widths");
                m.hidden.clear();
                for (std::size_t i = 0; i < obj["hidden"].size(); ++i)
                    m.hidden.push_back(as_count(obj["hidden"][i], at_index(hp, i), 1));
            }
            count("epochs", m.epochs, 1);
            count("batch", m.batch, 1);
            if (obj.contains("learning_rate")) {
                m.learning_rate = as_number(obj["learning_rate"], join(path, "learning_rate"));
                if (!(m.learning_rate > 0.0)) fail(join(path, "learning_rate"), "must be positive");
            }
            break;
        }
    }
    return spec;
}

ojson parse_json_text(std::string_view text, std::string_view source_name) {
    try {
        return ojson::parse(text.begin(), text.end());
    } catch (const ojson::parse_error& e) {
        const std::size_t upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i < upto; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::string what = e.what();
        if (const auto p = what.find("] "); p != std::string::npos) what = what.substr(p + 2);
        throw ConfigError(std::string(source_name) + ":" + std::to_string(line) + ":" + std::to_string(col) +
                          ": syntax error: " + what);
    }
}

// ---- sweep ----------------------------------------------------------------

template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& body) {
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) body(i);
        });
}

std::string transform_key(const AdversarialSpec& spec) {
    return transform_kind(spec) + "(" + transform_params(spec) + ")";
}

std::string classifier_key(const ClassifierSpec& spec) {
    return std::string(to_string(kind_of(spec))) + "(" + describe(spec) + ")";
}

std::vector<std::string> trace_ids_for(const DataSource& source, const std::vector<Trace>& traces) {
    std::vector<std::string> ids;
    ids.reserve(traces.size());
    if (std::holds_alternative<SyntheticSource>(source)) {
        std::map<std::string, std::size_t> seen;
        for (const auto& t : traces) ids.push_back(synthetic_trace_id(t.label, seen[t.label]++));
    } else {
        for (const auto& f : std::get<CaptureSource>(source).files) ids.push_back(f.path.filename().string());
    }
    return ids;
}

struct Prepared {
    std::optional<FeatureTable> table;
    CellStatus status = CellStatus::Ok;
    std::string reason;
    std::uint64_t seed = 0;
};

}  // namespace

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                              std::string_view source_name) {
    const ojson root = parse_json_text(text, source_name);
    check_keys(root, "", {"scenario", "source", "windows", "transforms", "classifiers", "split", "seed", "output_dir"});
    ExperimentConfig cfg;
    if (!root.contains("source")) fail("source", "required");
    std::string default_scenario;
    cfg.source = parse_source(root["source"], "source", base_dir, default_scenario);
    cfg.scenario = root.contains("scenario") ? as_string(root["scenario"], "scenario") : default_scenario;

    if (root.contains("windows")) {
        cfg.windows = parse_windows(root["windows"], "windows");
    } else {
        for (auto n : kDefaultBurstSizes) cfg.windows.push_back(WindowSpec::burst(n));
    }

    if (root.contains("transforms")) {
        const auto& t = root["transforms"];
        if (!t.is_array() || t.empty()) fail("transforms", "expected a non-empty list");
        for (std::size_t i = 0; i < t.size(); ++i)
            for (auto& s : parse_transform(t[i], at_index("transforms", i))) cfg.transforms.push_back(std::move(s));
    } else {
        cfg.transforms.emplace_back(NoTransform{});
    }
    for (std::size_t i = 0; i < cfg.transforms.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (transform_key(cfg.transforms[i]) == transform_key(cfg.transforms[j]))
                fail("transforms", "transform " + transform_key(cfg.transforms[i]) + " listed twice");

    if (root.contains("classifiers")) {
        const auto& c = root["classifiers"];
        if (!c.is_array() || c.empty()) fail("classifiers", "expected a non-empty list");
        for (std::size_t i = 0; i < c.size(); ++i)
            cfg.classifiers.push_back(parse_classifier_json(c[i], at_index("classifiers", i)));
    } else {
        for (auto k : {ModelKind::KNN, ModelKind::DecisionTree, ModelKind::RandomForest, ModelKind::AdaBoost,
                       ModelKind::MLP})
            cfg.classifiers.push_back(default_spec(k));
    }
    for (std::size_t i = 0; i < cfg.classifiers.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (classifier_key(cfg.classifiers[i]) == classifier_key(cfg.classifiers[j]))
                fail("classifiers", "classifier " + classifier_key(cfg.classifiers[i]) + " listed twice");

    if (root.contains("split")) {
        check_keys(root["split"], "split", {"train_fraction"});
        if (root["split"].contains("train_fraction"))
            cfg.split.train_fraction = as_number(root["split"]["train_fraction"], "split.train_fraction");
        try {
            cfg.split.validate();
        } catch (const std::invalid_argument& e) {
            fail("split", e.what());
        }
    }
    if (root.contains("seed")) {
        if (!root["seed"].is_number_unsigned()) fail("seed", "expected a non-negative integer");
        cfg.seed = root["seed"].get<std::uint64_t>();
    }
    if (root.contains("output_dir")) cfg.output_dir = base_dir / as_string(root["output_dir"], "output_dir");
    else cfg.output_dir = base_dir / "results";
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string() + ": file not found or unreadable");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.parent_path(), path.string());
}

ClassifierSpec parse_classifier(std::string_view json_text) {
    return parse_classifier_json(parse_json_text(json_text, "classifier"), "classifier");
}

std::string synthetic_trace_id(std::string_view label, std::size_t index) {
    return std::string(label) + "_" + std::to_string(index);
}

std::vector<Trace> load_traces(const DataSource& source, std::uint64_t seed) {
    if (const auto* s = std::get_if<SyntheticSource>(&source))
        return generate_dataset(s->profiles, s->traces_per_class, s->duration, seed, s->scenario);
    std::vector<Trace> traces;
    for (const auto& f : std::get<CaptureSource>(source).files) {
        const auto ext = f.path.extension().string();
        Trace t;
        if (ext == ".pcap" || ext == ".cap") {
            t = read_pcap_file(f.path, f.label).trace;
        } else {
            std::ifstream in(f.path);
            if (!in) throw DataError("cannot open trace file " + f.path.string() + ": file not found or unreadable");
            t = read_trace(in);
        }
        t.label = f.label;
        traces.push_back(std::move(t));
    }
    return traces;
}

ExtractedTable extract_table(std::span<const Trace> traces, std::span<const std::string> trace_ids,
                             const WindowSpec& spec) {
    if (traces.size() != trace_ids.size()) throw std::invalid_argument("extract_table: one id per trace required");
    ExtractedTable out;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        try {
            const auto series = extract_series(traces[i], spec, trace_ids[i]);
            out.dropped_windows += series.dropped_windows;
            out.table.append(series);
        } catch (const EmptySeries&) {
            out.dropped_windows += window_packets(traces[i], spec).size();
        }
    }
    if (out.table.empty()) throw DataError("no trace yields a complete window of size " + spec.label());
    return out;
}

std::uint64_t transform_seed(std::uint64_t master, const WindowSpec& window, const AdversarialSpec& transform) {
    return derive_seed(master, {fnv1a("transform"), fnv1a(window.label()), fnv1a(transform_key(transform))});
}

std::uint64_t attack_seed(std::uint64_t master, const WindowSpec& window, const AdversarialSpec& transform,
                          const ClassifierSpec& classifier) {
    return derive_seed(master, {fnv1a("attack"), fnv1a(window.label()), fnv1a(transform_key(transform)),
                                fnv1a(classifier_key(classifier))});
}

AttackResult run_attack(const FeatureTable& table, const ClassifierSpec& classifier, const SplitSpec& split_spec,
                        std::uint64_t seed) {
    const Dataset data = make_dataset(table);
    if (data.classes.size() < 2) throw DataError("feature table holds a single class '" + data.classes.front() + "'");
    SplitSpec s = split_spec;
    s.seed = seed;
    const Split parts = split(data, s);
    const TrainedModel model = train_model(parts.train, with_seed(classifier, seed));
    return {evaluate(model, parts.test), parts.train.size(), parts.test.size()};
}

std::string_view to_string(CellStatus s) noexcept {
    switch (s) {
        case CellStatus::Ok: return "ok";
        case CellStatus::Skipped: return "skipped";
        case CellStatus::Failed: return "failed";
    }
    return "failed";
}

std::size_t worker_count() {
    if (const char* env = std::getenv("TPB_WORKERS"); env && *env) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (*end != '\0' || n < 1) throw ConfigError("TPB_WORKERS must be a positive integer, got '" + std::string(env) + "'");
        return static_cast<std::size_t>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

SweepReport run_experiment(const ExperimentConfig& config, std::ostream* log) {
    if (config.windows.empty()) throw ConfigError("windows: window sweep is empty");
    if (config.transforms.empty()) throw ConfigError("transforms: transform list is empty");
    if (config.classifiers.empty()) throw ConfigError("classifiers: classifier list is empty");
    const std::size_t workers = worker_count();

    const std::vector<Trace> traces = load_traces(config.source, config.seed);
    const std::vector<std::string> ids = trace_ids_for(config.source, traces);

    const std::size_t nw = config.windows.size();
    const std::size_t nt = config.transforms.size();
    const std::size_t nc = config.classifiers.size();

    std::vector<std::optional<ExtractedTable>> extracted(nw);
    std::vector<std::string> extract_errors(nw);
    parallel_for(nw, workers, [&](std::size_t w) {
        try {
            extracted[w] = extract_table(traces, ids, config.windows[w]);
        } catch (const std::exception& e) {
            extract_errors[w] = e.what();
        }
    });

    std::vector<Prepared> prepared(nw * nt);
    parallel_for(nw * nt, workers, [&](std::size_t i) {
        const auto& window = config.windows[i / nt];
        const auto& transform = config.transforms[i % nt];
        auto& p = prepared[i];
        p.seed = transform_seed(config.seed, window, transform);
        const auto& source = extracted[i / nt];
        if (!source) {
            p.status = CellStatus::Failed;
            p.reason = extract_errors[i / nt];
            return;
        }
        try {
            p.table = apply_transform(source->table, with_seed(transform, p.seed));
        } catch (const SeriesTooShort& e) {
            p.status = CellStatus::Skipped;
            p.reason = e.what();
        } catch (const std::exception& e) {
            p.status = CellStatus::Failed;
            p.reason = e.what();
        }
    });

    SweepReport report;
    report.rows.resize(nw * nt * nc);
    std::mutex log_mutex;
    std::size_t done = 0;
    parallel_for(nw * nt * nc, workers, [&](std::size_t i) {
        const std::size_t w = i / (nt * nc), t = (i / nc) % nt, c = i % nc;
        const auto& window = config.windows[w];
        const auto& transform = config.transforms[t];
        const auto& classifier = config.classifiers[c];
        const auto& p = prepared[w * nt + t];
        SweepRow& row = report.rows[i];
        row.scenario = config.scenario;
        row.classifier = to_string(kind_of(classifier));
        row.classifier_params = describe(classifier);
        row.window_size = window.label();
        row.transform = transform_kind(transform);
        row.transform_params = transform_params(transform);
        row.seed = attack_seed(config.seed, window, transform, classifier);
        row.transform_seed = p.seed;
        row.dropped_windows = extracted[w] ? extracted[w]->dropped_windows : 0;
        row.status = p.status;
        row.reason = p.reason;
        if (p.table) {
            try {
                const auto r = run_attack(*p.table, classifier, config.split, row.seed);
                row.accuracy = r.accuracy;
                row.n_train = r.n_train;
                row.n_test = r.n_test;
            } catch (const std::exception& e) {
                row.status = CellStatus::Failed;
                row.reason = e.what();
            }
        }
        if (log) {
            std::lock_guard lock(log_mutex);
            *log << "[" << ++done << "/" << report.rows.size() << "] window=" << row.window_size
                 << " transform=" << row.transform << (row.transform_params.empty() ? "" : "(" + row.transform_params + ")")
                 << " classifier=" << row.classifier << " -> "
                 << (row.accuracy ? csv::format_double(*row.accuracy) : std::string(to_string(row.status)))
                 << '\n';
        }
    });
    return report;
}

void write_sweep_csv(std::ostream& out, const SweepReport& report) {
    out << "scenario,classifier,classifier_params,window_size,transform,transform_params,accuracy,n_train,n_test,"
           "seed,transform_seed,dropped_windows,status,reason\n";
    for (const auto& r : report.rows) {
        out << csv::escape(r.scenario) << ',' << csv::escape(r.classifier) << ',' << csv::escape(r.classifier_params)
            << ',' << csv::escape(r.window_size) << ',' << csv::escape(r.transform) << ','
            << csv::escape(r.transform_params) << ',' << (r.accuracy ? csv::format_double(*r.accuracy) : "") << ','
            << r.n_train << ',' << r.n_test << ',' << r.seed << ',' << r.transform_seed << ',' << r.dropped_windows
            << ',' << to_string(r.status) << ',' << csv::escape(r.reason) << '\n';
    }
}

namespace {

template <class T>
void push_unique(std::vector<T>& v, const T& x) {
    if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

std::vector<std::string> split_params(const std::string& params) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(params);
    while (std::getline(in, cur, ';')) out.push_back(cur);
    return out;
}

// Column headers for parameter settings: only the tokens that vary.
std::vector<std::string> setting_labels(const std::vector<std::string>& settings) {
    std::vector<std::vector<std::string>> tokens;
    for (const auto& s : settings) tokens.push_back(split_params(s));
    std::vector<std::string> out;
    for (std::size_t i = 0; i < settings.size(); ++i) {
        std::string label;
        for (const auto& tok : tokens[i]) {
            const bool shared = std::all_of(tokens.begin(), tokens.end(), [&](const auto& other) {
                return std::find(other.begin(), other.end(), tok) != other.end();
            });
            if (shared) continue;
            label += (label.empty() ? "" : ";") + tok;
        }
        out.push_back(label.empty() ? settings[i] : label);
    }
    return out;
}

std::string sanitize(std::string s) {
    for (char& ch : s)
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '.') ch = '_';
    return s;
}

struct PivotSource {
    std::vector<std::string> windows;
    std::vector<std::string> settings;
    std::vector<std::pair<std::string, std::string>> classifiers;  // (kind, params)
    std::map<std::tuple<std::string, std::string, std::pair<std::string, std::string>>, const SweepRow*> cells;
};

void write_file(const std::filesystem::path& path, const std::string& content, std::vector<std::filesystem::path>& written) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << content;
    out.close();
    if (!out) throw DataError("error while writing " + path.string());
    written.push_back(path);
}

std::string cell_text(const SweepRow* row) {
    return row && row->accuracy ? csv::format_double(*row->accuracy) : "";
}

}  // namespace

std::vector<std::filesystem::path> emit_report(const SweepReport& report, const std::filesystem::path& dir) {
    if (report.rows.empty()) throw std::invalid_argument("emit_report: report has no rows");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());

    std::vector<std::filesystem::path> written;
    std::ostringstream sweep;
    write_sweep_csv(sweep, report);
    write_file(dir / "sweep.csv", sweep.str(), written);

    std::vector<std::string> kinds;
    std::map<std::string, PivotSource> pivots;
    for (const auto& r : report.rows) {
        push_unique(kinds, r.transform);
        auto& p = pivots[r.transform];
        push_unique(p.windows, r.window_size);
        push_unique(p.settings, r.transform_params);
        const std::pair<std::string, std::string> clf{r.classifier, r.classifier_params};
        push_unique(p.classifiers, clf);
        p.cells[{r.window_size, r.transform_params, clf}] = &r;
    }

    for (const auto& kind : kinds) {
        const auto& p = pivots[kind];
        // Classifier column names: the kind, qualified when a kind appears twice.
        std::vector<std::string> names;
        for (const auto& [k, params] : p.classifiers) {
            const auto same = std::count_if(p.classifiers.begin(), p.classifiers.end(),
                                            [&](const auto& c) { return c.first == k; });
            names.push_back(same > 1 ? k + "(" + params + ")" : k);
        }
        const auto lookup = [&](const std::string& w, const std::string& s, std::size_t c) -> const SweepRow* {
            const auto it = p.cells.find({w, s, p.classifiers[c]});
            return it == p.cells.end() ? nullptr : it->second;
        };

        if (p.settings.size() == 1) {
            std::ostringstream out;
            out << "window_size";
            for (const auto& n : names) out << ',' << csv::escape(n);
            out << '\n';
            for (const auto& w : p.windows) {
                out << csv::escape(w);
                for (std::size_t c = 0; c < names.size(); ++c) out << ',' << cell_text(lookup(w, p.settings[0], c));
                out << '\n';
            }
            write_file(dir / ("accuracy_vs_window_" + kind + ".csv"), out.str(), written);
            continue;
        }

        const auto labels = setting_labels(p.settings);
        const auto by_setting = [&](std::size_t c) {
            std::ostringstream out;
            out << "window_size";
            for (const auto& l : labels) out << ',' << csv::escape(l);
            out << '\n';
            for (const auto& w : p.windows) {
                out << csv::escape(w);
                for (const auto& s : p.settings) out << ',' << cell_text(lookup(w, s, c));
                out << '\n';
            }
            return out.str();
        };
        std::size_t figure = 0;
        for (std::size_t c = 0; c < p.classifiers.size(); ++c) {
            if (p.classifiers[c].first == "mlp") {
                figure = c;
                break;
            }
        }
        write_file(dir / ("accuracy_vs_window_" + kind + ".csv"), by_setting(figure), written);
        if (p.classifiers.size() > 1)
            for (std::size_t c = 0; c < p.classifiers.size(); ++c)
                write_file(dir / ("accuracy_vs_window_" + kind + "_" + sanitize(names[c]) + ".csv"), by_setting(c),
                           written);
    }
    return written;
}

}  // namespace tpb
