#include "cli.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <optional>
#include <random>

#include <CLI11.hpp>
#include <json.hpp>

#include "mvtensor/clustering.hpp"
#include "mvtensor/dataset_io.hpp"
#include "mvtensor/gcmf_lle.hpp"
#include "mvtensor/tcgf.hpp"

namespace mvtensor::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string shortest(double v) {
    std::array<char, 32> buf;
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), end);
}

std::string absolute_path(const std::string &p) { return fs::absolute(p).lexically_normal().string(); }

void write_json(const fs::path &path, const json &j) { write_file_atomic(path, j.dump(2) + "\n"); }

MatrixFormat format_for(const fs::path &p) {
    return p.extension() == ".mvb" ? MatrixFormat::Mvb : MatrixFormat::Csv;
}

// ---- anchors ---------------------------------------------------------------

struct AnchorsOpts {
    std::string manifest;
    Index k = 0;
    std::string method = "svd";
    std::uint64_t seed = 0;
    std::string out;
};

AnchorSet pick_anchors(const MultiViewDataset &d, Index k, const std::string &method,
                       std::uint64_t seed) {
    const AnchorMethod m = parse_anchor_method(method);
    return m == AnchorMethod::SvdLeverage ? select_anchors_svd(d, k) : select_anchors_kmeans(d, k, seed);
}

int cmd_anchors(const AnchorsOpts &o, std::ostream &out) {
    parse_anchor_method(o.method);
    const MultiViewDataset d = load_manifest(o.manifest);
    const AnchorSet a = pick_anchors(d, o.k, o.method, o.seed);
    write_file_atomic(o.out, a.to_json());
    out << "wrote " << a.indices.size() << " anchors to " << o.out << "\n";
    return kOk;
}

// ---- tcgf ------------------------------------------------------------------

struct TcgfOpts {
    std::string manifest;
    std::string anchors;
    Index k = 0;
    std::string anchor_method = "svd";
    double lambda_e = 0.1;
    double lambda_r = 1.0;
    double gamma = 0.5;
    Index dim = 3;
    Index knn = 5;
    std::string normalization = "symmetric";
    double tol = 1e-6;
    int max_iter = 100;
    std::uint64_t seed = 0;
    std::string out_dir;
    bool grid = false;
    double grid_min = -2;
    double grid_max = 1;
    int grid_points = 4;
};

json tcgf_options_json(const TcgfOpts &o) {
    json j;
    j["manifest"] = absolute_path(o.manifest);
    if (!o.anchors.empty())
        j["anchors"] = absolute_path(o.anchors);
    else
        j["k"] = o.k;
    j["anchor-method"] = o.anchor_method;
    j["lambda-e"] = o.lambda_e;
    j["lambda-r"] = o.lambda_r;
    j["gamma"] = o.gamma;
    j["dim"] = o.dim;
    j["knn"] = o.knn;
    j["normalization"] = o.normalization;
    j["tol"] = o.tol;
    j["max-iter"] = o.max_iter;
    j["seed"] = o.seed;
    j["out-dir"] = absolute_path(o.out_dir);
    return j;
}

TcgfResult tcgf_once(const MultiViewDataset &d, const AnchorSet &anchors, const TcgfOpts &o) {
    TcgfConfig cfg;
    cfg.lambda_e = o.lambda_e;
    cfg.lambda_r = o.lambda_r;
    cfg.gamma = o.gamma;
    cfg.dim = o.dim;
    cfg.normalization = parse_graph_normalization(o.normalization);
    cfg.tol = o.tol;
    cfg.max_iter = o.max_iter;
    cfg.seed = o.seed;
    cfg.validate(d.samples(), static_cast<Index>(anchors.indices.size()), d.view_count());
    TcgfResult r = solve_tcgf(d, anchors, o.knn, cfg);

    const fs::path dir = o.out_dir;
    fs::create_directories(dir);
    write_file_atomic(dir / "embedding.csv", matrix_to_csv(r.embedding));
    write_file_atomic(dir / "anchor_embedding.csv", matrix_to_csv(r.anchor_embedding));
    json alpha;
    alpha["alpha"] = std::vector<double>(r.alpha.data(), r.alpha.data() + r.alpha.size());
    alpha["converged"] = r.converged;
    alpha["iterations"] = r.iterations;
    alpha["rank_deficient"] = r.rank_deficient;
    write_json(dir / "alpha.json", alpha);
    write_file_atomic(dir / "history.csv", history_csv(r.history));
    write_file_atomic(dir / "anchors.json", anchors.to_json());

    json rc;
    rc["command"] = "tcgf";
    rc["options"] = tcgf_options_json(o);
    rc["result"] = {{"converged", r.converged}, {"iterations", r.iterations}};
    write_json(dir / "run_config.json", rc);
    return r;
}

int cmd_tcgf(const TcgfOpts &o, std::ostream &out, std::ostream &err) {
    parse_graph_normalization(o.normalization);
    parse_anchor_method(o.anchor_method);
    if (o.anchors.empty() && o.k < 1) throw ValidationError("either --anchors or --k is required");
    const MultiViewDataset d = load_manifest(o.manifest);
    const AnchorSet anchors = o.anchors.empty() ? pick_anchors(d, o.k, o.anchor_method, o.seed)
                                                : AnchorSet::from_json(read_file(o.anchors), d.samples());

    if (!o.grid) {
        const TcgfResult r = tcgf_once(d, anchors, o);
        out << "tcgf: " << r.iterations << " iterations, converged=" << (r.converged ? "true" : "false")
            << ", outputs in " << o.out_dir << "\n";
        if (!r.converged) {
            err << "warning: residuals did not fall below " << shortest(o.tol) << " within "
                << o.max_iter << " iterations\n";
            return kNotConverged;
        }
        return kOk;
    }

    if (o.grid_points < 1) throw ValidationError("--grid-points must be at least 1");
    std::vector<double> values;
    for (int i = 0; i < o.grid_points; ++i) {
        const double e = o.grid_points == 1
                             ? o.grid_min
                             : o.grid_min + (o.grid_max - o.grid_min) * i / (o.grid_points - 1);
        values.push_back(std::pow(10.0, e));
    }
    // every grid point reruns from the same anchor file
    std::string shared_anchors = o.anchors;
    if (shared_anchors.empty()) {
        shared_anchors = (fs::path(o.out_dir) / "anchors.json").string();
        write_file_atomic(shared_anchors, anchors.to_json());
    }
    std::string table = "lambda_e,lambda_r,converged,iterations,objective,dir\n";
    bool all_converged = true;
    for (double le : values) {
        for (double lr : values) {
            TcgfOpts point = o;
            point.grid = false;
            point.lambda_e = le;
            point.lambda_r = lr;
            const std::string name = "le_" + shortest(le) + "_lr_" + shortest(lr);
            point.out_dir = (fs::path(o.out_dir) / name).string();
            point.anchors = shared_anchors;
            const TcgfResult r = tcgf_once(d, anchors, point);
            all_converged = all_converged && r.converged;
            const double obj = r.history.empty() ? 0.0 : r.history.back().objective;
            table += shortest(le) + "," + shortest(lr) + "," + (r.converged ? "1" : "0") + "," +
                     std::to_string(r.iterations) + "," + shortest(obj) + "," + name + "\n";
        }
    }
    write_file_atomic(fs::path(o.out_dir) / "grid.csv", table);
    out << "tcgf grid: " << values.size() * values.size() << " runs, summary in "
        << (fs::path(o.out_dir) / "grid.csv").string() << "\n";
    return all_converged ? kOk : kNotConverged;
}

// ---- gcmf ------------------------------------------------------------------

struct GcmfOpts {
    std::string manifest;
    Index neighbors = 10;
    double lambda_c = 0.1;
    Index dim = 2;
    std::vector<Index> view_dims;
    std::string kernel = "gaussian";
    std::optional<double> bandwidth;
    double tol = 1e-6;
    int max_sweeps = 50;
    double reg = 1e-3;
    std::string out_dir;
};

int cmd_gcmf(const GcmfOpts &o, std::ostream &out, std::ostream &err) {
    GcmfConfig cfg;
    cfg.neighbors = o.neighbors;
    cfg.lambda_c = o.lambda_c;
    cfg.dim = o.dim;
    cfg.view_dims = o.view_dims;
    cfg.kernel = parse_embedding_kernel(o.kernel);
    cfg.bandwidth = o.bandwidth;
    cfg.tol = o.tol;
    cfg.max_sweeps = o.max_sweeps;
    cfg.reg = o.reg;
    const MultiViewDataset d = load_manifest(o.manifest);
    const GcmfResult r = solve_gcmf(d, cfg);

    const fs::path dir = o.out_dir;
    fs::create_directories(dir);
    for (std::size_t v = 0; v < r.embeddings.size(); ++v)
        write_file_atomic(dir / ("embedding_view_" + std::to_string(v) + ".csv"),
                          matrix_to_csv(r.embeddings[v].transpose()));
    write_file_atomic(dir / "history.csv", gcmf_history_csv(r.history));
    json summary;
    summary["converged"] = r.converged;
    summary["sweeps"] = r.sweeps;
    summary["eigenvalue_tie"] = r.eigenvalue_tie;
    summary["zero_degree_fallback"] = r.zero_degree_fallback;
    write_json(dir / "summary.json", summary);

    json opts;
    opts["manifest"] = absolute_path(o.manifest);
    opts["neighbors"] = o.neighbors;
    opts["lambda-c"] = o.lambda_c;
    opts["dim"] = o.dim;
    if (!o.view_dims.empty()) opts["view-dims"] = o.view_dims;
    opts["kernel"] = o.kernel;
    if (o.bandwidth) opts["bandwidth"] = *o.bandwidth;
    opts["tol"] = o.tol;
    opts["max-sweeps"] = o.max_sweeps;
    opts["reg"] = o.reg;
    opts["out-dir"] = absolute_path(o.out_dir);
    json rc;
    rc["command"] = "gcmf";
    rc["options"] = opts;
    rc["result"] = {{"converged", r.converged}, {"sweeps", r.sweeps}};
    write_json(dir / "run_config.json", rc);

    out << "gcmf: " << r.sweeps << " sweeps, converged=" << (r.converged ? "true" : "false")
        << ", outputs in " << o.out_dir << "\n";
    if (r.eigenvalue_tie) err << "warning: eigenvalue tie at the embedding dimension\n";
    if (!r.converged) {
        err << "warning: objective change stayed above " << shortest(o.tol) << " for "
            << o.max_sweeps << " sweeps\n";
        return kNotConverged;
    }
    return kOk;
}

// ---- cluster-eval ----------------------------------------------------------

struct EvalOpts {
    std::string embedding;
    Index clusters = 0;
    std::string truth;
    int repeats = 10;
    std::uint64_t seed = 0;
    std::string out;
};

std::uint64_t repeat_seed(std::uint64_t seed, int repeat) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(repeat)};
    std::array<std::uint32_t, 2> w{};
    seq.generate(w.begin(), w.end());
    return (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
}

std::pair<double, double> mean_std(const std::vector<double> &xs) {
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

int cmd_cluster_eval(const EvalOpts &o, std::ostream &out) {
    if (o.repeats < 1) throw ValidationError("--repeats must be at least 1");
    const Matrix emb = load_matrix(o.embedding, format_for(o.embedding));
    std::optional<LabelVector> truth;
    if (!o.truth.empty()) {
        truth = load_labels(o.truth);
        if (static_cast<Index>(truth->size()) != emb.rows())
            throw ValidationError("embedding has " + std::to_string(emb.rows()) +
                                  " rows but truth has " + std::to_string(truth->size()) + " labels");
    }

    json runs = json::array();
    std::vector<double> accs, nmis, purs;
    std::optional<KmeansResult> best;
    for (int r = 0; r < o.repeats; ++r) {
        const std::uint64_t s = repeat_seed(o.seed, r);
        KmeansResult km = kmeans(emb, o.clusters, s);
        json run;
        run["seed"] = s;
        run["inertia"] = km.inertia;
        if (truth) {
            accs.push_back(accuracy(km.labels, *truth));
            nmis.push_back(nmi(km.labels, *truth));
            purs.push_back(purity(km.labels, *truth));
            run["acc"] = accs.back();
            run["nmi"] = nmis.back();
            run["purity"] = purs.back();
        }
        runs.push_back(run);
        if (!best || km.inertia < best->inertia) best = std::move(km);
    }

    json m;
    m["clusters"] = o.clusters;
    m["repeats"] = o.repeats;
    m["seed"] = o.seed;
    if (truth) {
        const auto [acc, acc_std] = mean_std(accs);
        const auto [nm, nm_std] = mean_std(nmis);
        const auto [pu, pu_std] = mean_std(purs);
        m["acc"] = acc;
        m["acc_std"] = acc_std;
        m["nmi"] = nm;
        m["nmi_std"] = nm_std;
        m["purity"] = pu;
        m["purity_std"] = pu_std;
        m["nmi_normalization"] = "sqrt";
        out << "acc " << shortest(acc) << " nmi " << shortest(nm) << " purity " << shortest(pu) << "\n";
    }
    m["labels"] = best->labels.values();
    m["runs"] = runs;
    write_json(o.out, m);
    out << "wrote " << o.out << "\n";
    return kOk;
}

// ---- synth -----------------------------------------------------------------

struct SynthOpts {
    std::string out_dir;
    Index n_per_cluster = 100;
    Index clusters = 3;
    std::vector<Index> dims{10, 10, 10};
    std::vector<double> noise{0.5, 0.5, 0.5};
    std::uint64_t seed = 0;
    std::string format = "csv";
};

int cmd_synth(const SynthOpts &o, std::ostream &out) {
    if (o.dims.size() != o.noise.size())
        throw ValidationError("--dims and --noise need the same number of entries");
    if (o.n_per_cluster < 1 || o.clusters < 1) throw ValidationError("counts must be positive");
    BlobSpec spec;
    spec.n_per_cluster = o.n_per_cluster;
    spec.clusters = o.clusters;
    spec.dims = o.dims;
    spec.noise_sigmas = o.noise;
    spec.seed = o.seed;
    const fs::path manifest = save_dataset(o.out_dir, make_synthetic_blobs(spec), parse_matrix_format(o.format));
    out << "wrote " << manifest.string() << "\n";
    return kOk;
}

// ---- rerun -----------------------------------------------------------------

std::vector<std::string> args_from_config(const json &rc, const std::string &out_dir) {
    if (!rc.is_object() || !rc.contains("command") || !rc.contains("options") ||
        !rc["command"].is_string() || !rc["options"].is_object())
        throw FormatError("run config needs \"command\" and \"options\"");
    std::vector<std::string> args{rc["command"].get<std::string>()};
    auto scalar = [](const json &v) -> std::string {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
        if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
        if (v.is_number_float()) return shortest(v.get<double>());
        throw FormatError("unsupported option value " + v.dump());
    };
    for (const auto &[key, value] : rc["options"].items()) {
        if (key == "out-dir" && !out_dir.empty()) continue;
        if (value.is_boolean()) {
            if (value.get<bool>()) args.push_back("--" + key);
            continue;
        }
        args.push_back("--" + key);
        if (value.is_array())
            for (const auto &v : value) args.push_back(scalar(v));
        else
            args.push_back(scalar(value));
    }
    if (!out_dir.empty()) {
        args.push_back("--out-dir");
        args.push_back(out_dir);
    }
    return args;
}

json parse_json_file(const std::string &path) {
    const std::string text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::exception &e) {
        throw FormatError(path + ": " + e.what());
    }
}

int dispatch(const std::vector<std::string> &args, std::ostream &out, std::ostream &err, int depth);

int execute(const std::vector<std::string> &args, std::ostream &out, std::ostream &err, int depth) {
    CLI::App app{"Multi-view graph clustering toolkit", "mvtensor"};
    app.require_subcommand(1);

    AnchorsOpts ao;
    auto *anchors = app.add_subcommand("anchors", "select anchor samples");
    anchors->add_option("--manifest", ao.manifest, "dataset manifest")->required();
    anchors->add_option("--k", ao.k, "number of anchors")->required();
    anchors->add_option("--method", ao.method, "svd or kmeans");
    anchors->add_option("--seed", ao.seed, "seed for kmeans anchors");
    anchors->add_option("--out", ao.out, "anchors.json path")->required();

    TcgfOpts to;
    auto *tcgf = app.add_subcommand("tcgf", "tensorized consensus graph clustering");
    tcgf->add_option("--manifest", to.manifest)->required();
    auto *anchors_file = tcgf->add_option("--anchors", to.anchors, "anchors.json to use");
    auto *k = tcgf->add_option("--k", to.k, "select this many anchors");
    anchors_file->excludes(k);
    tcgf->add_option("--anchor-method", to.anchor_method, "svd or kmeans (with --k)");
    tcgf->add_option("--lambda-e", to.lambda_e);
    tcgf->add_option("--lambda-r", to.lambda_r);
    tcgf->add_option("--gamma", to.gamma, "view-weight exponent in (0, 1)");
    tcgf->add_option("--dim", to.dim, "embedding dimension");
    tcgf->add_option("--knn", to.knn, "anchor neighbors per sample");
    tcgf->add_option("--normalization", to.normalization, "symmetric or column");
    tcgf->add_option("--tol", to.tol);
    tcgf->add_option("--max-iter", to.max_iter);
    tcgf->add_option("--seed", to.seed);
    tcgf->add_option("--out-dir", to.out_dir)->required();
    tcgf->add_flag("--grid", to.grid, "sweep lambda-e x lambda-r over a log grid");
    tcgf->add_option("--grid-min", to.grid_min, "log10 of the smallest grid value");
    tcgf->add_option("--grid-max", to.grid_max, "log10 of the largest grid value");
    tcgf->add_option("--grid-points", to.grid_points);

    GcmfOpts go;
    double bandwidth = 0;
    auto *gcmf = app.add_subcommand("gcmf", "graph-consensus LLE embedding");
    gcmf->add_option("--manifest", go.manifest)->required();
    gcmf->add_option("--neighbors", go.neighbors);
    gcmf->add_option("--lambda-c", go.lambda_c);
    gcmf->add_option("--dim", go.dim);
    gcmf->add_option("--view-dims", go.view_dims, "per-view embedding dimensions");
    gcmf->add_option("--kernel", go.kernel, "gaussian or linear");
    auto *bw = gcmf->add_option("--bandwidth", bandwidth, "fixed gaussian bandwidth");
    gcmf->add_option("--tol", go.tol);
    gcmf->add_option("--max-sweeps", go.max_sweeps);
    gcmf->add_option("--reg", go.reg);
    gcmf->add_option("--out-dir", go.out_dir)->required();

    EvalOpts eo;
    auto *eval = app.add_subcommand("cluster-eval", "k-means on an embedding with metrics");
    eval->add_option("--embedding", eo.embedding)->required();
    eval->add_option("--clusters", eo.clusters)->required();
    eval->add_option("--truth", eo.truth, "ground-truth labels, one per line");
    eval->add_option("--repeats", eo.repeats);
    eval->add_option("--seed", eo.seed);
    eval->add_option("--out", eo.out, "metrics.json path")->required();

    SynthOpts so;
    auto *synth = app.add_subcommand("synth", "write a synthetic multi-view blobs dataset");
    synth->add_option("--out-dir", so.out_dir)->required();
    synth->add_option("--n-per-cluster", so.n_per_cluster);
    synth->add_option("--clusters", so.clusters);
    synth->add_option("--dims", so.dims);
    synth->add_option("--noise", so.noise);
    synth->add_option("--seed", so.seed);
    synth->add_option("--format", so.format, "csv or mvb");

    std::string config_path, rerun_out;
    auto *rerun = app.add_subcommand("rerun", "repeat a run from its run_config.json");
    rerun->add_option("--config", config_path)->required();
    rerun->add_option("--out-dir", rerun_out, "write here instead of the recorded directory");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError &e) {
        app.exit(e, out, err);
        return kValidation;
    }

    if (anchors->parsed()) return cmd_anchors(ao, out);
    if (tcgf->parsed()) return cmd_tcgf(to, out, err);
    if (gcmf->parsed()) {
        if (bw->count()) go.bandwidth = bandwidth;
        return cmd_gcmf(go, out, err);
    }
    if (eval->parsed()) return cmd_cluster_eval(eo, out);
    if (synth->parsed()) return cmd_synth(so, out);
    if (depth > 0) throw ValidationError("a run config cannot name another rerun");
    return dispatch(args_from_config(parse_json_file(config_path), rerun_out), out, err, depth + 1);
}

int dispatch(const std::vector<std::string> &args, std::ostream &out, std::ostream &err, int depth) {
    try {
        return execute(args, out, err, depth);
    } catch (const ValidationError &e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const ShapeError &e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const IoError &e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    } catch (const fs::filesystem_error &e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return kInternal;
    }
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    return dispatch(args, out, err, 0);
}

} // namespace mvtensor::cli
