#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <sys/wait.h>

#include "pcap_fixtures.hpp"
#include "tpb/cli.hpp"
#include "tpb/csv.hpp"
#include "tpb/features.hpp"

using namespace tpb;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

FeatureTable read_table(const std::filesystem::path& p) {
    std::ifstream in(p);
    return read_feature_csv(in);
}

std::map<std::string, std::string> csv_row(const std::string& header, const std::string& line) {
    const auto h = csv::split(header), v = csv::split(line);
    std::map<std::string, std::string> m;
    for (std::size_t i = 0; i < h.size(); ++i) m[h[i]] = v.at(i);
    return m;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
    CHECK(run({}).code == kExitUsage);
    CHECK(run({"frobnicate"}).code == kExitUsage);
    CHECK(run({"extract", "--bogus"}).code == kExitUsage);
    CHECK(run({"perturb", "--in", "x.csv"}).code == kExitUsage);                        // --mode missing
    CHECK(run({"synth", "--preset", "nope", "--out", "x"}).code == kExitUsage);
    CHECK(run({"extract", "--pcap", "a.pcap"}).code == kExitUsage);                     // no window
    CHECK(run({"extract", "--pcap", "a.pcap", "--burst", "5", "--dt", "1"}).code == kExitUsage);
    const auto dir = testutil::temp_dir("cli_usage");
    std::ofstream(dir / "f.csv") << "junk\n";
    CHECK(run({"perturb", "--in", (dir / "f.csv").string(), "--mode", "awgn"}).code == kExitUsage);  // --nu missing
    CHECK(run({"perturb", "--in", (dir / "f.csv").string(), "--mode", "blur"}).code == kExitUsage);
    CHECK(run({"attack", "--in", (dir / "f.csv").string(), "--classifier", "svm"}).code == kExitUsage);
    const auto help = run({"--help"});
    CHECK(help.code == kExitOk);
    CHECK(help.out.find("sweep") != std::string::npos);
}

TEST_CASE("missing inputs exit 2 with a file-not-found diagnostic") {
    const auto r = run({"extract", "--pcap", "missing.pcap", "--burst", "100"});
    CHECK(r.code == kExitData);
    CHECK(r.err.find("missing.pcap") != std::string::npos);
    CHECK(r.err.find("not found") != std::string::npos);
    CHECK(run({"sweep", "--config", "/nonexistent/exp.json"}).code == kExitData);
    CHECK(run({"attack", "--in", "/nonexistent/f.csv", "--classifier", "knn"}).code == kExitData);
}

TEST_CASE("selftest passes") {
    const auto r = run({"selftest"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("FAIL") == std::string::npos);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 8);
}

TEST_CASE("extract from a pcap, with a truncation warning") {
    const auto dir = testutil::temp_dir("cli_extract");
    fixture::PcapBuilder b(false, false);
    for (std::uint32_t i = 0; i < 10; ++i) b.tcp(100, i * 1000, 60 + i, 1, 2, 4000, 443, 512);
    b.truncated(101, 0, 54, 10);
    b.write(dir / "dev.pcap");
    const auto r = run({"extract", "--pcap", (dir / "dev.pcap").string(), "--burst", "5", "--label", "on",
                        "--out", (dir / "f.csv").string()});
    CHECK(r.code == kExitOk);
    CHECK(r.err.find("truncated") != std::string::npos);
    const auto t = read_table(dir / "f.csv");
    CHECK(t.size() == 2);
    CHECK(t.labels[0] == "on");
    CHECK(t.trace_ids[0] == "dev.pcap");
    CHECK(t.vectors[0][Feature::mean_len_pack] == 62);

    const auto stdout_run = run({"extract", "--pcap", (dir / "dev.pcap").string(), "--burst", "5"});
    CHECK(stdout_run.out.find(",dev,0,dev.pcap\n") != std::string::npos);
}

TEST_CASE("perturb realistic leaves the untouched columns equal") {
    const auto dir = testutil::temp_dir("cli_perturb");
    REQUIRE(run({"synth", "--preset", "utility_media_travel", "--traces-per-class", "1", "--duration", "30",
                 "--out", (dir / "corpus").string()})
                .code == kExitOk);
    REQUIRE(run({"extract", "--manifest", (dir / "corpus" / "manifest.csv").string(), "--burst", "100", "--out",
                 (dir / "f.csv").string()})
                .code == kExitOk);
    const auto r = run({"perturb", "--in", (dir / "f.csv").string(), "--mode", "realistic", "--nu", "2", "--seed",
                        "7", "--out", (dir / "g.csv").string()});
    CHECK(r.code == kExitOk);
    const auto f = read_table(dir / "f.csv"), g = read_table(dir / "g.csv");
    REQUIRE(f.size() == g.size());
    for (auto feat : {Feature::n_ip_unique, Feature::max_diff_time, Feature::mean_window, Feature::std_window,
                      Feature::mean_ipt})
        CHECK(column(f.vectors, feat) == column(g.vectors, feat));
    CHECK(column(f.vectors, Feature::std_ipt) != column(g.vectors, Feature::std_ipt));
    CHECK(g.transform == "realistic(nu=2)@7");
    CHECK(g.labels == f.labels);

    const auto smooth = run({"perturb", "--in", (dir / "f.csv").string(), "--mode", "smooth", "--window", "999"});
    CHECK(smooth.code == kExitData);
    CHECK(smooth.err.find("reduce the window length") != std::string::npos);
}

TEST_CASE("synth to pcap, then attack with a saved model") {
    const auto dir = testutil::temp_dir("cli_attack");
    REQUIRE(run({"synth", "--preset", "mic_on_off", "--traces-per-class", "2", "--duration", "20", "--format", "pcap",
                 "--out", (dir / "c").string()})
                .code == kExitOk);
    CHECK(std::filesystem::exists(dir / "c" / "mic_on_0.pcap"));
    REQUIRE(run({"extract", "--manifest", (dir / "c" / "manifest.csv").string(), "--burst", "50", "--out",
                 (dir / "f.csv").string()})
                .code == kExitOk);
    const auto r = run({"attack", "--in", (dir / "f.csv").string(), "--classifier", "forest", "--set", "n_trees=10",
                        "--seed", "3", "--model-out", (dir / "m.json").string()});
    CHECK(r.code == kExitOk);
    CHECK(r.out.rfind("accuracy=", 0) == 0);
    CHECK(r.out.find("n_train=") != std::string::npos);
    CHECK(testutil::slurp(dir / "m.json").find("\"forest\"") != std::string::npos);
    const auto self = run({"attack", "--in", (dir / "f.csv").string(), "--test", (dir / "f.csv").string(),
                           "--classifier", "tree"});
    CHECK(self.out.rfind("accuracy=1 ", 0) == 0);
}

TEST_CASE("sweep equals the chained stages with the seeds it reports") {
    const auto dir = testutil::temp_dir("cli_compose");
    std::ofstream(dir / "exp.json") << R"({
      "source": {"type": "synthetic", "preset": "utility_media_travel", "traces_per_class": 2, "duration": 40},
      "windows": [100],
      "transforms": [{"mode": "awgn", "nu": 2}],
      "classifiers": [{"kind": "knn", "k": 3}, {"kind": "forest", "n_trees": 10}],
      "seed": 21, "output_dir": "out"})";
    const auto s = run({"sweep", "--config", (dir / "exp.json").string(), "--quiet"});
    REQUIRE(s.code == kExitOk);
    CHECK(s.out.find("2 cells: 2 ok, 0 skipped, 0 failed") != std::string::npos);
    const auto sweep = testutil::slurp(dir / "out" / "sweep.csv");
    std::istringstream lines(sweep);
    std::string header, l1, l2;
    std::getline(lines, header);
    std::getline(lines, l1);
    std::getline(lines, l2);

    REQUIRE(run({"synth", "--config", (dir / "exp.json").string(), "--out", (dir / "c").string()}).code == kExitOk);
    REQUIRE(run({"extract", "--manifest", (dir / "c" / "manifest.csv").string(), "--burst", "100", "--out",
                 (dir / "f.csv").string()})
                .code == kExitOk);
    for (const auto& line : {l1, l2}) {
        const auto row = csv_row(header, line);
        REQUIRE(run({"perturb", "--in", (dir / "f.csv").string(), "--mode", "awgn", "--nu", "2", "--seed",
                     row.at("transform_seed"), "--out", (dir / "g.csv").string()})
                    .code == kExitOk);
        std::vector<std::string> args{"attack", "--in", (dir / "g.csv").string(), "--classifier", row.at("classifier"),
                                      "--seed", row.at("seed")};
        if (row.at("classifier") == "knn") args.insert(args.end(), {"--set", "k=3"});
        else args.insert(args.end(), {"--set", "n_trees=10"});
        const auto a = run(args);
        REQUIRE(a.code == kExitOk);
        CHECK(a.out == "accuracy=" + row.at("accuracy") + " n_train=" + row.at("n_train") +
                           " n_test=" + row.at("n_test") + "\n");
    }
}

TEST_CASE("the installed binary uses the same exit codes") {
    const char* bin = std::getenv("TPB_BIN");
    if (!bin) return;
    const auto dir = testutil::temp_dir("cli_binary");
    const auto quiet = " >" + (dir / "o").string() + " 2>&1";
    const auto code = [&](const std::string& args) {
        const int status = std::system((std::string(bin) + " " + args + quiet).c_str());
        return WEXITSTATUS(status);
    };
    CHECK(code("selftest") == 0);
    CHECK(code("--no-such-flag") == 1);
    CHECK(code("extract --pcap missing.pcap --burst 10") == 2);
}
