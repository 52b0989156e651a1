#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"

#include "spectre/io.hpp"
#include "spectre/synth.hpp"
#include "spectre/types.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;
using namespace spectre;

namespace {

// Scratch directory under the build tree, wiped per test case.
struct Scratch {
    fs::path dir;
    Scratch() {
        dir = fs::temp_directory_path() / "spectre_cli_test";
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SPECTRE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

int run_cli_stdout(const std::string& args, const std::string& out_path) {
    const std::string cmd =
        std::string(SPECTRE_CLI_PATH) + " " + args + " > " + out_path + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return json::parse(in);
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

const char* kSpec = R"({
  "n_clean": 800,
  "d": 16,
  "eps": 0.05,
  "m": 1,
  "clean_spectrum": [100, 100, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1],
  "displacement": 6.0,
  "poison_spread": 0.1,
  "num_labels": 3,
  "target_label": 1,
  "seed": 5
})";

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("gen writes per-label matrices, masks, and a spec echo") {
    Scratch tmp;
    write_text(tmp / "spec.json", kSpec);
    REQUIRE(run_cli("gen --spec " + (tmp / "spec.json") + " --outdir " + (tmp / "data")) == 0);

    for (int i = 0; i < 3; ++i) {
        const Matrix s = read_rmx(tmp / ("data/label_" + std::to_string(i) + ".rmx"));
        const Mask mask = read_mask(tmp / ("data/mask_" + std::to_string(i) + ".bin"));
        CHECK(s.cols() == 16);
        CHECK(static_cast<Index>(mask.size()) == s.rows());
        const int n_poison = static_cast<int>(std::count(mask.begin(), mask.end(), 1));
        CHECK(n_poison == (i == 1 ? 40 : 0));
    }
    const json echo = load_json(tmp / "data/spec.json");
    CHECK(echo.at("seed") == 5);
    CHECK(echo.at("mode") == "auto");
    CHECK(echo.at("clean_spectrum").size() == 16);

    // Same spec again: byte-identical artifacts.
    REQUIRE(run_cli("gen --spec " + (tmp / "spec.json") + " --outdir " + (tmp / "data2")) == 0);
    CHECK(file_bytes(tmp / "data/label_1.rmx") == file_bytes(tmp / "data2/label_1.rmx"));
    CHECK(file_bytes(tmp / "data/mask_1.bin") == file_bytes(tmp / "data2/mask_1.bin"));
    CHECK(file_bytes(tmp / "data/spec.json") == file_bytes(tmp / "data2/spec.json"));
}

TEST_CASE("gen rejects unknown fields and invariant violations") {
    Scratch tmp;
    write_text(tmp / "typo.json", R"({"n_clean": 100, "d": 8, "epss": 0.05})");
    CHECK(run_cli("gen --spec " + (tmp / "typo.json") + " --outdir " + (tmp / "out")) == 2);
    write_text(tmp / "bad.json", R"({"n_clean": 100, "d": 8, "eps": 0.4})");
    CHECK(run_cli("gen --spec " + (tmp / "bad.json") + " --outdir " + (tmp / "out")) == 2);
    write_text(tmp / "notjson.json", "not json at all");
    CHECK(run_cli("gen --spec " + (tmp / "notjson.json") + " --outdir " + (tmp / "out")) == 2);
}

TEST_CASE("detect report carries the removal set and mask metrics") {
    Scratch tmp;
    write_text(tmp / "spec.json", kSpec);
    REQUIRE(run_cli("gen --spec " + (tmp / "spec.json") + " --outdir " + (tmp / "data")) == 0);
    const std::string flags = "detect --input " + (tmp / "data/label_1.rmx") +
                              " --eps 0.05 --kmax 16 --mask " + (tmp / "data/mask_1.bin") +
                              " --output " + (tmp / "report.json");
    REQUIRE(run_cli(flags) == 0);

    const json r = load_json(tmp / "report.json");
    CHECK(r.at("command") == "detect");
    CHECK(r.at("config").at("eps") == 0.05);
    CHECK(r.at("config").at("k").is_null());
    CHECK(r.at("config").at("seed") == 0);
    CHECK(r.at("timings_ms").is_null());

    // Budget: floor(1.5 * 0.05 * 840) = 63, sorted ascending.
    const auto removed = r.at("removed_indices").get<std::vector<Index>>();
    CHECK(removed.size() == 63);
    CHECK(std::is_sorted(removed.begin(), removed.end()));

    // Metrics agree with a local recomputation against the mask.
    const Mask mask = read_mask(tmp / "data/mask_1.bin");
    const RemovalMetrics m = eval_removal(mask, removed);
    CHECK(r.at("metrics").at("poisons_removed") == m.p_rm);
    CHECK(r.at("metrics").at("recall") == doctest::Approx(m.recall));
    CHECK(r.at("metrics").at("clean_removed") == m.clean_removed);
    CHECK(m.recall >= 0.9);

    CHECK(r.at("per_k").size() == 16);
    CHECK(r.at("k_used") == r.at("per_k").at(r.at("k_used").get<int>() - 1).at(0));
}

TEST_CASE("detect re-run with identical flags is byte-identical") {
    Scratch tmp;
    write_text(tmp / "spec.json", kSpec);
    REQUIRE(run_cli("gen --spec " + (tmp / "spec.json") + " --outdir " + (tmp / "data")) == 0);
    const std::string flags = "detect --input " + (tmp / "data/label_1.rmx") +
                              " --eps 0.05 --kmax 16 --output " + (tmp / "report.json");
    REQUIRE(run_cli(flags) == 0);
    const std::string first = file_bytes(tmp / "report.json");
    REQUIRE(run_cli(flags) == 0);
    CHECK(file_bytes(tmp / "report.json") == first);
}

TEST_CASE("detect honours a fixed --k and rejects bad parameters") {
    Scratch tmp;
    write_text(tmp / "spec.json", kSpec);
    REQUIRE(run_cli("gen --spec " + (tmp / "spec.json") + " --outdir " + (tmp / "data")) == 0);
    const std::string in = tmp / "data/label_1.rmx";

    REQUIRE(run_cli("detect --input " + in + " --eps 0.05 --k 4 --output " +
                    (tmp / "fixed.json")) == 0);
    const json r = load_json(tmp / "fixed.json");
    CHECK(r.at("k_used") == 4);
    CHECK(r.at("config").at("k") == 4);
    CHECK(r.at("per_k").size() == 1);

    CHECK(run_cli("detect --input " + in + " --eps 0 --output " + (tmp / "x.json")) == 2);
    CHECK(run_cli("detect --input " + in + " --eps 0.5 --output " + (tmp / "x.json")) == 2);
    CHECK(run_cli("detect --input " + in + " --eps 0.05 --k 4 --kmax 8 --output " +
                  (tmp / "x.json")) == 2);
    CHECK(run_cli("detect --input " + (tmp / "missing.rmx") + " --eps 0.05 --output " +
                  (tmp / "x.json")) == 2);
    CHECK(run_cli("detect --input " + in + " --eps 0.05 --output " + (tmp / "x.json") +
                  " --mask " + (tmp / "missing.bin")) == 2);
}

TEST_CASE("identify-target picks the poisoned label from a directory") {
    Scratch tmp;
    write_text(tmp / "spec.json", kSpec);
    REQUIRE(run_cli("gen --spec " + (tmp / "spec.json") + " --outdir " + (tmp / "data")) == 0);
    const std::string flags = "identify-target --inputs " + (tmp / "data") +
                              " --eps 0.05 --kmax 16 --output " + (tmp / "target.json");
    REQUIRE(run_cli(flags) == 0);

    const json r = load_json(tmp / "target.json");
    CHECK(r.at("command") == "identify-target");
    CHECK(r.at("target_label") == 1);
    CHECK(r.at("per_label").size() == 3);
    for (const auto& row : r.at("per_label")) {
        CHECK(row.at("per_k").size() == 16);
        if (row.at("label") != 1) CHECK(row.at("q").get<double>() == doctest::Approx(1.0));
    }
    CHECK(r.at("target_q").get<double>() > 1.1);

    // Byte-identical on re-run, and --parallel must not change the result.
    const std::string first = file_bytes(tmp / "target.json");
    REQUIRE(run_cli(flags) == 0);
    CHECK(file_bytes(tmp / "target.json") == first);
    REQUIRE(run_cli("identify-target --inputs " + (tmp / "data") +
                    " --eps 0.05 --kmax 16 --parallel 3 --output " +
                    (tmp / "target_p.json")) == 0);
    const json rp = load_json(tmp / "target_p.json");
    CHECK(rp.at("target_label") == 1);
    CHECK(rp.at("target_q") == r.at("target_q"));

    // A gap in the label ids is a data error.
    fs::remove(tmp / "data/label_1.rmx");
    CHECK(run_cli(flags) == 2);
}

TEST_CASE("estimate matches sample statistics on clean data and beats naive under corruption") {
    Scratch tmp;

    // Clean gaussian rows, written as CSV to exercise that reader too.
    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss;
    const int n = 4000, d = 6;
    Matrix clean(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) clean(i, j) = gauss(rng);
    {
        std::ofstream csv(tmp / "clean.csv");
        csv.precision(17);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) csv << (j ? "," : "") << clean(i, j);
            csv << '\n';
        }
    }
    REQUIRE(run_cli("estimate --input " + (tmp / "clean.csv") +
                    " --eps 0.05 --output " + (tmp / "clean.json")) == 0);
    const json rc = load_json(tmp / "clean.json");
    for (int j = 0; j < d; ++j) {
        CHECK(rc.at("robust_mean").at(j).get<double>() ==
              doctest::Approx(rc.at("naive_mean").at(j).get<double>()).epsilon(0.05));
    }
    CHECK(rc.at("removed_by_filter").get<Index>() <= n / 100);

    // 5% of rows replaced by a variance spike along one axis.
    Matrix dirty = clean;
    for (int i = 0; i < n / 20; ++i) dirty(i, 0) = 25.0 * gauss(rng);
    write_rmx(tmp / "dirty.rmx", dirty);
    REQUIRE(run_cli("estimate --input " + (tmp / "dirty.rmx") +
                    " --eps 0.05 --output " + (tmp / "dirty.json")) == 0);
    const json rd = load_json(tmp / "dirty.json");
    double robust_err = 0.0, naive_err = 0.0;
    for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
            const double truth = a == b ? 1.0 : 0.0;
            robust_err += std::pow(rd.at("robust_cov").at(a).at(b).get<double>() - truth, 2);
            naive_err += std::pow(rd.at("naive_cov").at(a).at(b).get<double>() - truth, 2);
        }
    }
    CHECK(std::sqrt(robust_err) < std::sqrt(naive_err));
    CHECK(rd.at("removed_by_filter").get<Index>() > 0);

    // --no-filter reproduces the naive statistics (up to summation order).
    REQUIRE(run_cli("estimate --input " + (tmp / "dirty.rmx") +
                    " --eps 0.05 --no-filter --output " + (tmp / "nofilter.json")) == 0);
    const json rn = load_json(tmp / "nofilter.json");
    CHECK(rn.at("removed_by_filter") == 0);
    CHECK(rn.at("iterations_cov") == 1);
    for (int j = 0; j < d; ++j)
        CHECK(rn.at("robust_mean").at(j).get<double>() ==
              doctest::Approx(rn.at("naive_mean").at(j).get<double>()).epsilon(1e-12));

    // All-identical rows cannot be whitened: numeric failure.
    Matrix flat = Matrix::Ones(50, 3);
    write_rmx(tmp / "flat.rmx", flat);
    CHECK(run_cli("estimate --input " + (tmp / "flat.rmx") +
                  " --eps 0.05 --output " + (tmp / "x.json")) == 3);
}

TEST_CASE("bench agrees with the dense mirror and reports timings") {
    Scratch tmp;
    REQUIRE(run_cli_stdout("bench --k 2 --m 2 --reps 2", tmp / "bench.json") == 0);
    const json r = load_json(tmp / "bench.json");
    CHECK(r.at("command") == "bench");
    CHECK(r.at("dim") == 4);
    CHECK(r.at("rel_diff").get<double>() <= 1e-12);
    CHECK(r.at("implicit_ms").get<double>() > 0.0);
    CHECK(r.at("dense_ms").get<double>() > 0.0);
    CHECK(run_cli("bench --k 0 --m 2 --reps 2") == 2);
}

TEST_SUITE_END();
