// Command-line front end: detect / identify-target / estimate / gen / bench.
// Reports are JSON with a fixed key order; wall-clock timings are emitted
// only under --timings so that identical flags yield byte-identical files.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "spectre/detect.hpp"
#include "spectre/errors.hpp"
#include "spectre/io.hpp"
#include "spectre/linalg.hpp"
#include "spectre/robust.hpp"
#include "spectre/synth.hpp"
#include "spectre/types.hpp"

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;
using namespace spectre;

class Stopwatch {
  public:
    double ms() const {
        const auto now = std::chrono::steady_clock::now();
        return std::chrono::duration<double, std::milli>(now - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

json vector_json(const Vector& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        rows.push_back(json(std::vector<double>(m.row(i).begin(), m.row(i).end())));
    }
    return rows;
}

json per_k_json(const std::vector<std::pair<int, double>>& per_k) {
    json out = json::array();
    for (const auto& [k, q] : per_k) out.push_back(json::array({k, q}));
    return out;
}

json metrics_json(const Mask& mask, const IndexList& removed) {
    const RemovalMetrics m = eval_removal(mask, removed);
    return json{{"poisons_removed", m.p_rm},
                {"recall", m.recall},
                {"clean_removed", m.clean_removed}};
}

void write_report(const std::string& path, const json& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open output file: " + path);
    out << report.dump(2) << '\n';
    if (!out.good()) throw DataError("write failed: " + path);
}

Mask load_mask_checked(const std::string& path, Index n) {
    Mask mask = read_mask(path);
    if (static_cast<Index>(mask.size()) != n)
        throw DataError("mask " + path + " has " + std::to_string(mask.size()) +
                        " entries but the input has " + std::to_string(n) + " rows");
    return mask;
}

// ---------------------------------------------------------------------------
// detect

struct DetectOpts {
    std::string input;
    std::string output;
    std::string mask;
    double eps = 0.0;
    double alpha = 4.0;
    int k = -1;  // -1 = adaptive
    int k_max = 64;
    double mult = 1.5;
    std::uint64_t seed = 0;
    bool timings = false;
};

void run_detect(const DetectOpts& o) {
    Stopwatch total;
    SpectreConfig cfg;
    cfg.eps = o.eps;
    cfg.alpha = o.alpha;
    cfg.k_max = o.k_max;
    cfg.mult = o.mult;
    cfg.seed = o.seed;
    cfg.filter.seed = o.seed;
    if (o.k >= 0) cfg.k = o.k;

    Stopwatch load;
    const Matrix s = read_matrix_auto(o.input);
    const double load_ms = load.ms();

    Stopwatch run;
    const DetectionReport rep =
        cfg.k ? spectre_detect(s, *cfg.k, cfg) : spectre_detect_adaptive(s, cfg);
    const double detect_ms = run.ms();

    json config{{"input", o.input},
                {"output", o.output},
                {"mask", o.mask.empty() ? json(nullptr) : json(o.mask)},
                {"eps", cfg.eps},
                {"alpha", cfg.alpha},
                {"k", cfg.k ? json(*cfg.k) : json(nullptr)},
                {"k_max", cfg.k_max},
                {"mult", cfg.mult},
                {"seed", cfg.seed}};
    json report{{"command", "detect"},
                {"config", std::move(config)},
                {"removed_indices", rep.removed},
                {"k_used", rep.k_used},
                {"mean_que", rep.mean_que},
                {"per_k", per_k_json(rep.per_k)}};
    if (!o.mask.empty())
        report["metrics"] = metrics_json(load_mask_checked(o.mask, s.rows()), rep.removed);
    report["timings_ms"] = o.timings
        ? json{{"load", load_ms}, {"detect", detect_ms}, {"total", total.ms()}}
        : json(nullptr);
    write_report(o.output, report);
}

// ---------------------------------------------------------------------------
// identify-target

struct IdentifyOpts {
    std::string inputs;
    std::string output;
    double eps = 0.0;
    double alpha = 4.0;
    int k_max = 64;
    double mult = 1.5;
    std::uint64_t seed = 0;
    int parallel = 1;
    bool timings = false;
};

std::vector<std::string> label_files(const std::string& dir) {
    if (!fs::is_directory(dir))
        throw DataError("inputs directory not found: " + dir);
    std::map<int, std::string> by_id;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.size() < 11 || name.rfind("label_", 0) != 0 ||
            name.substr(name.size() - 4) != ".rmx")
            continue;
        const std::string digits = name.substr(6, name.size() - 10);
        if (digits.empty() ||
            digits.find_first_not_of("0123456789") != std::string::npos)
            continue;
        const int id = std::stoi(digits);
        if (!by_id.emplace(id, entry.path().string()).second)
            throw DataError("duplicate label id " + std::to_string(id) + " in " + dir);
    }
    if (by_id.empty())
        throw DataError("no label_<id>.rmx files in " + dir);
    std::vector<std::string> files;
    for (const auto& [id, path] : by_id) {
        if (id != static_cast<int>(files.size()))
            throw DataError("label ids in " + dir + " must be contiguous from 0; missing label_" +
                            std::to_string(files.size()) + ".rmx");
        files.push_back(path);
    }
    return files;
}

void run_identify(const IdentifyOpts& o) {
    Stopwatch total;
    SpectreConfig cfg;
    cfg.eps = o.eps;
    cfg.alpha = o.alpha;
    cfg.k_max = o.k_max;
    cfg.mult = o.mult;
    cfg.seed = o.seed;
    cfg.filter.seed = o.seed;
    cfg.threads = o.parallel;

    Stopwatch load;
    const std::vector<std::string> files = label_files(o.inputs);
    std::vector<Matrix> labels;
    labels.reserve(files.size());
    for (const std::string& f : files) labels.push_back(read_rmx(f));
    const double load_ms = load.ms();

    Stopwatch run;
    const TargetResult res = target_identifier(labels, cfg);
    const double scan_ms = run.ms();

    json per_label = json::array();
    for (std::size_t i = 0; i < res.per_label.size(); ++i) {
        const KIdentifierResult& r = res.per_label[i];
        json sweep = json::array();
        for (const KSweepEntry& e : r.sweep) sweep.push_back(json::array({e.k, e.q}));
        per_label.push_back(json{{"label", i}, {"k", r.k}, {"q", r.q}, {"per_k", std::move(sweep)}});
    }
    json config{{"inputs", o.inputs},
                {"output", o.output},
                {"eps", cfg.eps},
                {"alpha", cfg.alpha},
                {"k_max", cfg.k_max},
                {"mult", cfg.mult},
                {"seed", cfg.seed},
                {"parallel", cfg.threads}};
    json report{{"command", "identify-target"},
                {"config", std::move(config)},
                {"target_label", res.label},
                {"target_q", res.q},
                {"per_label", std::move(per_label)}};
    report["timings_ms"] = o.timings
        ? json{{"load", load_ms}, {"scan", scan_ms}, {"total", total.ms()}}
        : json(nullptr);
    write_report(o.output, report);
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateOpts {
    std::string input;
    std::string output;
    double eps = 0.0;
    bool no_filter = false;
    bool timings = false;
};

void run_estimate(const EstimateOpts& o) {
    Stopwatch total;
    if (!o.no_filter && (o.eps <= 0.0 || o.eps >= 1.0 / 3.0))
        throw ParameterError("estimate: eps must lie in (0, 1/3) unless --no-filter is given");

    const Matrix s = read_matrix_auto(o.input);
    bool all_equal = true;
    for (Index i = 1; i < s.rows() && all_equal; ++i)
        all_equal = (s.row(i).array() == s.row(0).array()).all();
    if (s.rows() > 1 && all_equal)
        throw DegenerateDataError("estimate: all input rows are identical");

    const Vector naive_mean = s.colwise().mean();
    const Matrix centered = s.rowwise() - naive_mean.transpose();
    const Matrix naive_cov =
        centered.transpose() * centered / static_cast<double>(s.rows());

    Stopwatch run;
    const double eff_eps = o.no_filter ? 0.0 : o.eps;
    const RobustEstimate est = robust_gaussian(s, eff_eps);
    const double estimate_ms = run.ms();

    json config{{"input", o.input},
                {"output", o.output},
                {"eps", o.eps},
                {"no_filter", o.no_filter},
                {"seed", FilterConfig{}.seed}};
    json report{{"command", "estimate"},
                {"config", std::move(config)},
                {"robust_mean", vector_json(est.mean)},
                {"robust_cov", matrix_json(est.cov)},
                {"naive_mean", vector_json(naive_mean)},
                {"naive_cov", matrix_json(naive_cov)},
                {"iterations_mean", est.iterations_mean},
                {"iterations_cov", est.iterations_cov},
                {"removed_by_filter", est.removed_by_filter}};
    report["timings_ms"] =
        o.timings ? json{{"estimate", estimate_ms}, {"total", total.ms()}} : json(nullptr);
    write_report(o.output, report);
}

// ---------------------------------------------------------------------------
// gen

struct GenOpts {
    std::string spec_path;
    std::string outdir;
};

SignatureMode parse_mode(const std::string& name) {
    if (name == "auto") return SignatureMode::Auto;
    if (name == "top") return SignatureMode::Top;
    if (name == "indices") return SignatureMode::Indices;
    if (name == "vectors") return SignatureMode::Vectors;
    throw ParameterError("gen: unknown signature mode '" + name +
                         "' (want auto|top|indices|vectors)");
}

const char* mode_name(SignatureMode mode) {
    switch (mode) {
        case SignatureMode::Auto: return "auto";
        case SignatureMode::Top: return "top";
        case SignatureMode::Indices: return "indices";
        case SignatureMode::Vectors: return "vectors";
    }
    throw ParameterError("gen: invalid signature mode value");
}

SynthSpec parse_spec(const json& j) {
    static const std::vector<std::string> known{
        "n_clean", "d", "eps", "m", "clean_spectrum", "mode", "signature_indices",
        "signature_vectors", "displacement", "poison_spread", "num_labels",
        "target_label", "seed"};
    if (!j.is_object()) throw DataError("gen: spec file must hold a JSON object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ParameterError("gen: unknown spec field '" + key + "'");
    }
    SynthSpec spec;
    spec.n_clean = j.value("n_clean", spec.n_clean);
    spec.d = j.value("d", spec.d);
    spec.eps = j.value("eps", spec.eps);
    spec.m = j.value("m", spec.m);
    if (j.contains("clean_spectrum")) {
        const auto vals = j.at("clean_spectrum").get<std::vector<double>>();
        spec.clean_spectrum = Eigen::Map<const Vector>(vals.data(),
                                                       static_cast<Index>(vals.size()));
    } else if (spec.d > 0) {
        spec.clean_spectrum = Vector::Ones(spec.d);
    }
    spec.mode = parse_mode(j.value("mode", std::string("auto")));
    if (j.contains("signature_indices"))
        spec.signature_indices = j.at("signature_indices").get<std::vector<int>>();
    if (j.contains("signature_vectors")) {
        const auto cols = j.at("signature_vectors").get<std::vector<std::vector<double>>>();
        if (cols.empty()) throw ParameterError("gen: signature_vectors must be non-empty");
        spec.signature_vectors.resize(static_cast<Index>(cols[0].size()),
                                      static_cast<Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (cols[c].size() != cols[0].size())
                throw ParameterError("gen: signature_vectors columns differ in length");
            spec.signature_vectors.col(static_cast<Index>(c)) =
                Eigen::Map<const Vector>(cols[c].data(), static_cast<Index>(cols[c].size()));
        }
    }
    spec.displacement = j.value("displacement", spec.displacement);
    spec.poison_spread = j.value("poison_spread", spec.poison_spread);
    spec.num_labels = j.value("num_labels", spec.num_labels);
    spec.target_label = j.value("target_label", spec.target_label);
    spec.seed = j.value("seed", spec.seed);
    return spec;
}

json spec_json(const SynthSpec& spec) {
    json j{{"n_clean", spec.n_clean},
           {"d", spec.d},
           {"eps", spec.eps},
           {"m", spec.m},
           {"clean_spectrum", vector_json(spec.clean_spectrum)},
           {"mode", mode_name(spec.mode)}};
    if (!spec.signature_indices.empty()) j["signature_indices"] = spec.signature_indices;
    if (spec.signature_vectors.size() > 0) {
        json cols = json::array();
        for (Index c = 0; c < spec.signature_vectors.cols(); ++c) {
            const Vector col = spec.signature_vectors.col(c);
            cols.push_back(vector_json(col));
        }
        j["signature_vectors"] = std::move(cols);
    }
    j["displacement"] = spec.displacement;
    j["poison_spread"] = spec.poison_spread;
    j["num_labels"] = spec.num_labels;
    j["target_label"] = spec.target_label;
    j["seed"] = spec.seed;
    return j;
}

void run_gen(const GenOpts& o) {
    std::ifstream in(o.spec_path, std::ios::binary);
    if (!in) throw DataError("cannot open spec file: " + o.spec_path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError("gen: invalid JSON in " + o.spec_path + ": " + e.what());
    }
    const SynthSpec spec = parse_spec(j);
    const LabeledDataset data = generate(spec);

    fs::create_directories(o.outdir);
    const fs::path dir(o.outdir);
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        write_rmx((dir / ("label_" + std::to_string(i) + ".rmx")).string(), data.labels[i]);
        write_mask((dir / ("mask_" + std::to_string(i) + ".bin")).string(), data.masks[i]);
    }
    write_report((dir / "spec.json").string(), spec_json(data.spec));
}

// ---------------------------------------------------------------------------
// bench

struct BenchOpts {
    int k = 0;
    int m = 0;
    int reps = 0;
};

void run_bench(const BenchOpts& o) {
    if (o.k < 1 || o.m < 1 || o.reps < 1)
        throw ParameterError("bench: k, m, and reps must all be positive");
    const Index k = o.k;
    const Index m = o.m;
    const Index dim = k * k;
    const double dense_bytes = 8.0 * static_cast<double>(dim) * static_cast<double>(dim);
    if (dense_bytes > 1.5e9)
        throw ParameterError("bench: dense mirror of T needs " +
                             std::to_string(dense_bytes / 1e9) + " GB; reduce k");

    std::mt19937_64 rng(0);
    std::normal_distribution<double> gauss;
    Matrix y(k, m);
    for (Index j = 0; j < m; ++j)
        for (Index i = 0; i < k; ++i) y(i, j) = gauss(rng);

    const ImplicitTMatrix t(y);
    Vector v(dim);
    for (Index i = 0; i < dim; ++i) v[i] = gauss(rng);
    v.normalize();

    // Warm the caches, then time the implicit operator.
    Vector implicit_out = apply_implicit_T(t, v);
    Stopwatch implicit_watch;
    for (int r = 0; r < o.reps; ++r) implicit_out = apply_implicit_T(t, v);
    const double implicit_ms = implicit_watch.ms() / o.reps;

    // Dense mirror: columns z_j = vec(y_j y_j^T), T = Z Z^T / m - vec(I) vec(I)^T.
    Stopwatch dense_watch;
    Matrix z(dim, m);
    for (Index j = 0; j < m; ++j) {
        const Matrix outer = y.col(j) * y.col(j).transpose();
        z.col(j) = Eigen::Map<const Vector>(outer.data(), dim);
    }
    Matrix t_dense = z * z.transpose() / static_cast<double>(m);
    for (Index a = 0; a < k; ++a)
        for (Index b = 0; b < k; ++b) t_dense(a * k + a, b * k + b) -= 1.0;
    const Vector dense_out = t_dense * v;
    const double dense_ms = dense_watch.ms();

    const double denom = std::max(dense_out.norm(), 1e-300);
    const double rel_diff = (implicit_out - dense_out).norm() / denom;
    const double ratio = dense_ms / std::max(implicit_ms, 1e-9);

    json report{{"command", "bench"},
                {"config", json{{"k", o.k}, {"m", o.m}, {"reps", o.reps}, {"seed", 0}}},
                {"dim", dim},
                {"rel_diff", rel_diff},
                {"implicit_ms", implicit_ms},
                {"dense_ms", dense_ms},
                {"ratio", ratio}};
    std::cout << report.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SPECTRE poison detection: robust covariance, QUE scores, and baselines"};
    app.require_subcommand(1);

    DetectOpts det;
    CLI::App* detect = app.add_subcommand("detect", "score one representation matrix and remove the budgeted tail");
    detect->add_option("--input", det.input, "input matrix (.rmx or .csv)")->required();
    detect->add_option("--eps", det.eps, "poisoned-fraction upper bound, in (0, 1/3)")->required();
    detect->add_option("--alpha", det.alpha, "QUE interpolation strength")->capture_default_str();
    CLI::Option* k_opt = detect->add_option("--k", det.k, "fixed projection rank (default: adaptive)");
    detect->add_option("--kmax", det.k_max, "adaptive sweep ceiling")->capture_default_str()->excludes(k_opt);
    detect->add_option("--mult", det.mult, "removal budget multiplier")->capture_default_str();
    detect->add_option("--seed", det.seed, "RNG seed for filter calibration")->capture_default_str();
    detect->add_option("--mask", det.mask, "ground-truth 0/1 mask; adds metrics to the report");
    detect->add_flag("--timings", det.timings, "record wall-clock timings in the report");
    detect->add_option("--output", det.output, "report JSON path")->required();
    detect->callback([&det] { run_detect(det); });

    IdentifyOpts ident;
    CLI::App* identify = app.add_subcommand("identify-target", "find the poisoned label among label_<id>.rmx files");
    identify->add_option("--inputs", ident.inputs, "directory of label_<id>.rmx files")->required();
    identify->add_option("--eps", ident.eps, "poisoned-fraction upper bound, in (0, 1/3)")->required();
    identify->add_option("--alpha", ident.alpha, "QUE interpolation strength")->capture_default_str();
    identify->add_option("--kmax", ident.k_max, "adaptive sweep ceiling")->capture_default_str();
    identify->add_option("--mult", ident.mult, "removal budget multiplier")->capture_default_str();
    identify->add_option("--seed", ident.seed, "RNG seed for filter calibration")->capture_default_str();
    identify->add_option("--parallel", ident.parallel, "worker threads across labels")->capture_default_str();
    identify->add_flag("--timings", ident.timings, "record wall-clock timings in the report");
    identify->add_option("--output", ident.output, "report JSON path")->required();
    identify->callback([&ident] { run_identify(ident); });

    EstimateOpts est;
    CLI::App* estimate = app.add_subcommand("estimate", "robust mean/covariance of one matrix, next to the naive estimates");
    estimate->add_option("--input", est.input, "input matrix (.rmx or .csv)")->required();
    estimate->add_option("--eps", est.eps, "corruption bound for the filters")->required();
    estimate->add_flag("--no-filter", est.no_filter, "skip the filters; report sample statistics");
    estimate->add_flag("--timings", est.timings, "record wall-clock timings in the report");
    estimate->add_option("--output", est.output, "report JSON path")->required();
    estimate->callback([&est] { run_estimate(est); });

    GenOpts gen;
    CLI::App* gen_cmd = app.add_subcommand("gen", "generate a synthetic labeled dataset from a JSON spec");
    gen_cmd->add_option("--spec", gen.spec_path, "JSON spec file")->required();
    gen_cmd->add_option("--outdir", gen.outdir, "output directory")->required();
    gen_cmd->callback([&gen] { run_gen(gen); });

    BenchOpts bench;
    CLI::App* bench_cmd = app.add_subcommand("bench", "time the implicit fourth-moment operator against its dense mirror");
    bench_cmd->add_option("--k", bench.k, "whitened dimension")->required();
    bench_cmd->add_option("--m", bench.m, "number of samples")->required();
    bench_cmd->add_option("--reps", bench.reps, "implicit applies to average over")->required();
    bench_cmd->callback([&bench] { run_bench(bench); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const DegenerateDataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
