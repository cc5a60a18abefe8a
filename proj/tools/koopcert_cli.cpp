// Command-line front end: data generation/ingestion, Galerkin assembly,
// invariance diagnostics, error bounds, expected-error surrogates,
// hyperparameter tuning and forecasting. Emits CSV tables plus a JSON
// manifest per run; identical configuration and seed give byte-identical
// outputs (timestamps live only in the manifest).

#include "koopcert/bessel.hpp"
#include "koopcert/certify.hpp"
#include "koopcert/dynamics.hpp"
#include "koopcert/errors.hpp"
#include "koopcert/galerkin.hpp"
#include "koopcert/geometry.hpp"
#include "koopcert/observables.hpp"
#include "koopcert/serialize.hpp"
#include "koopcert/snapshots.hpp"
#include "koopcert/surrogate.hpp"
#include "koopcert/tune.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace koopcert;

namespace {

constexpr const char* kVersion = "0.1.0";

int exit_code_for(const Error& e) {
    switch (e.code()) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument:
        return 2;
    case ErrorCode::DataError:
    case ErrorCode::SchemaError:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::InsufficientData:
        return 3;
    default:
        return 4;
    }
}

Eigen::VectorXd parse_vector(const std::string& text) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            vals.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw_error(ErrorCode::ConfigError, "cannot parse number list: " + text);
        }
    }
    if (vals.empty()) throw_error(ErrorCode::ConfigError, "empty number list");
    return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

// Raw numeric CSV with a header row: one state per row.
Eigen::MatrixXd read_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_error(ErrorCode::DataError, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw_error(ErrorCode::SchemaError, path + ": empty");
    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw_error(ErrorCode::SchemaError,
                            path + ": bad value at row " + std::to_string(lineno));
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw_error(ErrorCode::SchemaError,
                        path + ": ragged row " + std::to_string(lineno));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw_error(ErrorCode::SchemaError, path + ": no data rows");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    return m;
}

std::uint64_t file_checksum(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();
    return fnv1a(bytes.data(), bytes.size());
}

// Collects output files and writes the run manifest.
class RunOutput {
public:
    RunOutput(std::string command, fs::path dir, json config)
        : command_(std::move(command)), dir_(std::move(dir)), config_(std::move(config)) {
        fs::create_directories(dir_);
    }

    fs::path path(const std::string& name) const { return dir_ / name; }

    std::ofstream open_csv(const std::string& name) {
        std::ofstream out(path(name));
        if (!out) throw_error(ErrorCode::DataError, "cannot write " + name);
        out << std::setprecision(17);
        files_.push_back(name);
        return out;
    }

    void note_file(const std::string& name) { files_.push_back(name); }

    void finish() {
        json outputs = json::object();
        for (const std::string& name : files_) {
            char hex[17];
            std::snprintf(hex, sizeof(hex), "%016llx",
                          static_cast<unsigned long long>(file_checksum(path(name))));
            outputs[name] = std::string(hex);
        }
        json manifest;
        manifest["command"] = command_;
        manifest["version"] = kVersion;
        manifest["config"] = config_;
        manifest["outputs"] = outputs;
        const auto now = std::chrono::system_clock::now();
        manifest["timestamp_unix"] =
            std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch())
                .count();
        std::ofstream out(dir_ / "manifest.json");
        if (!out) throw_error(ErrorCode::DataError, "cannot write manifest.json");
        out << manifest.dump(2) << "\n";
    }

    json& config() { return config_; }

private:
    std::string command_;
    fs::path dir_;
    json config_;
    std::vector<std::string> files_;
};

DynamicalSystem make_system(const std::string& name, double dt) {
    if (name == "duffing") return DynamicalSystem::duffing(dt > 0 ? dt : 0.25);
    if (name == "lorenz63") return DynamicalSystem::lorenz63(dt > 0 ? dt : 0.1);
    throw_error(ErrorCode::ConfigError, "unknown system: " + name + " (field --system)");
}

// Fitted coordinate observable in the system's working basis.
struct FittedObservable {
    Eigen::VectorXd coeffs;
    double init_error = 0.0;
    int coord = -1; // >= 0 when the target is a state coordinate
};

Eigen::MatrixXd working_basis_samples(const GalerkinSystem& sys) {
    if (sys.space != FunctionSpace::L2) {
        throw_error(ErrorCode::SpaceMismatch, "observable fitting needs an L2 system");
    }
    if (sys.basis.empty() || sys.data_X.rows() == 0) {
        throw_error(ErrorCode::DataError,
                    "system directory carries no dictionary descriptor or data");
    }
    const Dictionary dict = dictionary_from_descriptor(sys.basis);
    Eigen::MatrixXd samples = dict.evaluate(sys.data_X);
    if (sys.basis_map.size() > 0) samples *= sys.basis_map;
    return samples;
}

FittedObservable resolve_observable(const GalerkinSystem& sys, const std::string& spec) {
    FittedObservable out;
    if (spec.rfind("coord:", 0) == 0) {
        const int coord = std::stoi(spec.substr(6)) - 1;
        if (coord < 0 || coord >= sys.data_X.cols()) {
            throw_error(ErrorCode::ConfigError,
                        "observable coordinate out of range: " + spec);
        }
        const Eigen::MatrixXd samples = working_basis_samples(sys);
        const LeastSquaresFit fit =
            initialization_error(samples, sys.data_w, sys.data_X.col(coord));
        out.coeffs = fit.coeffs;
        out.init_error = fit.error;
        out.coord = coord;
        return out;
    }
    if (spec.rfind("coeffs:", 0) == 0) {
        const Eigen::MatrixXd m = read_trajectory_csv(spec.substr(7));
        out.coeffs = m.col(0);
        if (out.coeffs.size() != sys.size()) {
            throw_error(ErrorCode::ConfigError,
                        "observable coefficient count does not match the system size");
        }
        return out;
    }
    throw_error(ErrorCode::ConfigError,
                "observable must be coord:<i> or coeffs:<file>, got " + spec);
}

GalerkinSystem apply_reduction(GalerkinSystem sys, const std::string& reduce) {
    if (reduce.empty() || reduce == "none") return sys;
    const auto colon = reduce.find(':');
    if (colon == std::string::npos) {
        throw_error(ErrorCode::ConfigError, "--reduce must be none, svd:<r> or pad:<r>");
    }
    const std::string kind = reduce.substr(0, colon);
    Eigen::Index r = 0;
    try {
        r = std::stol(reduce.substr(colon + 1));
    } catch (const std::exception&) {
        throw_error(ErrorCode::ConfigError, "bad reduction rank in --reduce");
    }
    if (kind == "svd") return svd_truncate(sys, r);
    if (kind == "pad") return pad_truncate(sys, -1.0, r).system;
    throw_error(ErrorCode::ConfigError, "unknown reduction kind: " + kind);
}

void write_series_csv(std::ofstream& out, const ErrorSeries& min_series,
                      const ErrorSeries* full_series, const Eigen::VectorXd& exact,
                      double init_error, const GalerkinSystem& sys) {
    out << "step,exact_error,bound_E1,bound_E2,bound_min,bound_full,init_component,"
           "proj_component\n";
    for (std::size_t i = 0; i < min_series.steps.size(); ++i) {
        const int step = min_series.steps[i];
        const double init =
            init_error > 0.0 ? op_norm_power(sys, step) * init_error : 0.0;
        out << step << ",";
        if (exact.size() > static_cast<Eigen::Index>(i)) {
            out << exact(static_cast<Eigen::Index>(i));
        }
        out << "," << init + min_series.form1(static_cast<Eigen::Index>(i)) << ","
            << init + min_series.form2(static_cast<Eigen::Index>(i)) << ","
            << init + min_series.values(static_cast<Eigen::Index>(i)) << ",";
        if (full_series) {
            out << init + full_series->values(static_cast<Eigen::Index>(i));
        }
        out << "," << init << ","
            << min_series.proj_components(static_cast<Eigen::Index>(i)) << "\n";
    }
}

// ---------------------------------------------------------------------------
// Subcommand payloads
// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string system = "duffing";
    std::string sampling = "random";
    double dt = -1.0;
    Eigen::Index count = 1000;
    std::uint64_t seed = 0;
    std::string box_lo, box_hi, x0;
    int burn_in = 500;
    std::string out = "out";
};

void run_simulate(const SimulateArgs& a, RunOutput& run) {
    const DynamicalSystem system = make_system(a.system, a.dt);
    SnapshotSet set;
    if (a.sampling == "random") {
        RandomBoxSampling sampling;
        sampling.lo = a.box_lo.empty()
                          ? Eigen::VectorXd::Constant(system.dimension, -2.0).eval()
                          : parse_vector(a.box_lo);
        sampling.hi = a.box_hi.empty()
                          ? Eigen::VectorXd::Constant(system.dimension, 2.0).eval()
                          : parse_vector(a.box_hi);
        sampling.count = a.count;
        sampling.seed = a.seed;
        set = generate_snapshots(system, sampling);
    } else if (a.sampling == "ergodic") {
        ErgodicTrajectorySampling sampling;
        sampling.x0 = a.x0.empty() ? Eigen::VectorXd::Ones(system.dimension).eval()
                                   : parse_vector(a.x0);
        sampling.count = a.count;
        sampling.burn_in = a.burn_in;
        set = generate_snapshots(system, sampling);
    } else {
        throw_error(ErrorCode::ConfigError, "--sampling must be random or ergodic");
    }
    write_snapshot_csv(run.path("snapshots.csv").string(), set);
    run.note_file("snapshots.csv");
}

struct IngestArgs {
    std::string input;
    std::string mode = "paired";
    bool normalize = false;
    std::string out = "out";
};

void run_ingest(const IngestArgs& a, RunOutput& run) {
    SnapshotSet set;
    if (a.mode == "paired") {
        set = read_snapshot_csv(a.input);
        if (a.normalize) {
            throw_error(ErrorCode::ConfigError,
                        "--normalize applies to trajectory mode only");
        }
    } else if (a.mode == "trajectory") {
        const IngestResult result = ingest_trajectory_csv(a.input, a.normalize);
        set = result.snapshots;
        if (result.normalization.applied) {
            json norm;
            norm["mean"] = std::vector<double>(
                result.normalization.mean.data(),
                result.normalization.mean.data() + result.normalization.mean.size());
            norm["std"] = std::vector<double>(
                result.normalization.std.data(),
                result.normalization.std.data() + result.normalization.std.size());
            run.config()["normalization"] = norm;
        }
    } else {
        throw_error(ErrorCode::ConfigError, "--mode must be paired or trajectory");
    }
    write_snapshot_csv(run.path("snapshots.csv").string(), set);
    run.note_file("snapshots.csv");
}

struct BuildArgs {
    std::string snapshots;
    std::string dict = "chebyshev"; // edmd only
    int degree = 9;
    std::string domain_lo, domain_hi;
    Eigen::Index centers = 100;
    std::uint64_t center_seed = 0;
    double scale = -1.0;
    double order = 2.0;
    std::string reduce = "none";
    std::string out = "sys";
};

void run_edmd(const BuildArgs& a, RunOutput& run) {
    const SnapshotSet set = read_snapshot_csv(a.snapshots);
    Dictionary dict = [&]() {
        if (a.dict == "chebyshev") {
            Eigen::MatrixXd domain(2, set.dim());
            if (!a.domain_lo.empty() && !a.domain_hi.empty()) {
                domain.row(0) = parse_vector(a.domain_lo).transpose();
                domain.row(1) = parse_vector(a.domain_hi).transpose();
            } else {
                // Default: the data bounding box, stretched a quarter.
                const Eigen::RowVectorXd lo = set.X.colwise().minCoeff();
                const Eigen::RowVectorXd hi = set.X.colwise().maxCoeff();
                const Eigen::RowVectorXd mid = 0.5 * (lo + hi);
                domain.row(0) = mid + 1.25 * (lo - mid);
                domain.row(1) = mid + 1.25 * (hi - mid);
            }
            return Dictionary::chebyshev_tensor(
                std::vector<int>(static_cast<std::size_t>(set.dim()), a.degree), domain);
        }
        const Eigen::MatrixXd C = sample_centers_from_box(set.X, a.centers, a.center_seed);
        const double s = a.scale > 0 ? a.scale : default_kernel_scale(set);
        if (a.dict == "exp-rbf") return Dictionary::exponential_rbf(C, s);
        if (a.dict == "matern-rbf") return Dictionary::matern_bessel_rbf(C, s, a.order);
        throw_error(ErrorCode::ConfigError, "unknown dictionary kind: " + a.dict);
    }();

    GalerkinSystem sys = build_edmd(dict, set);
    sys.basis = describe_dictionary(dict);
    if (sys.rank_deficient) {
        std::cerr << "warning: G is rank deficient (numerical rank " << sys.rank << " of "
                  << sys.size() << "); proceeding with the pseudoinverse cutoff\n";
    }
    sys = apply_reduction(std::move(sys), a.reduce);
    save_system(run.path("system").string(), sys);
    run.config()["rank_deficient"] = sys.rank_deficient;
    run.config()["numerical_rank"] = static_cast<std::int64_t>(sys.rank);
}

void run_kedmd(const BuildArgs& a, RunOutput& run) {
    const SnapshotSet set = read_snapshot_csv(a.snapshots);
    KernelSpec kernel{a.scale > 0 ? a.scale : default_kernel_scale(set), a.order};
    GalerkinSystem sys = build_kedmd(kernel, set);
    sys.basis = describe_kernel(kernel);
    if (sys.rank_deficient) {
        std::cerr << "warning: G is rank deficient (numerical rank " << sys.rank << " of "
                  << sys.size() << "); proceeding with the pseudoinverse cutoff\n";
    }
    sys = apply_reduction(std::move(sys), a.reduce);
    save_system(run.path("system").string(), sys);
    run.config()["scale"] = kernel.scale;
    run.config()["numerical_rank"] = static_cast<std::int64_t>(sys.rank);
}

struct AnglesArgs {
    std::string galerkin;
    double cutoff = -1.0;
    std::string out = "out";
};

void run_angles(const AnglesArgs& a, RunOutput& run) {
    const GalerkinSystem sys = load_system(a.galerkin);
    const AngleErrorTable table = principal_observable_errors(sys, a.cutoff);
    {
        std::ofstream out = run.open_csv("angles.csv");
        out << "index,theta,one_step_error\n";
        for (Eigen::Index j = 0; j < table.angles.size(); ++j) {
            out << j + 1 << "," << table.angles(j) << "," << table.one_step_errors(j)
                << "\n";
        }
    }
    json fit_json;
    if (table.angles.size() >= 4) {
        const BreakpointFit fit = breakpoint_threshold(table.angles, table.one_step_errors);
        fit_json["breakpoint"] = fit.breakpoint;
        fit_json["degenerate"] = fit.degenerate;
    } else {
        fit_json["degenerate"] = true;
        fit_json["reason"] = "fewer than 4 angle/error pairs";
    }
    std::ofstream out(run.path("breakpoint.json"));
    out << fit_json.dump(2) << "\n";
    run.note_file("breakpoint.json");
}

struct PadArgs {
    std::string galerkin;
    Eigen::Index r = 0;
    double cutoff = -1.0;
    std::string out = "out";
};

void run_pad(const PadArgs& a, RunOutput& run) {
    const GalerkinSystem sys = load_system(a.galerkin);
    const PadReduction pad = pad_truncate(sys, a.cutoff, a.r);
    save_system(run.path("system").string(), pad.system);
    std::ofstream out = run.open_csv("angles.csv");
    out << "index,theta\n";
    for (Eigen::Index j = 0; j < pad.angles.size(); ++j) {
        out << j + 1 << "," << pad.angles(j) << "\n";
    }
}

struct BoundsArgs {
    std::string galerkin;
    std::string observable = "coord:1";
    std::string x0;
    int horizon = 20;
    std::string reference;
    std::string out = "out";
};

Eigen::VectorXd exact_errors_from_reference(const GalerkinSystem& sys,
                                            const FittedObservable& obs,
                                            const Eigen::MatrixXd& reference,
                                            int horizon) {
    // Pointwise |g(x_n) - Psi(x_0) K^n g| along the supplied trajectory.
    if (obs.coord < 0) return {};
    const Dictionary dict = dictionary_from_descriptor(sys.basis);
    Eigen::MatrixXd phi0 = dict.evaluate(reference.topRows(1));
    if (sys.basis_map.size() > 0) phi0 *= sys.basis_map;
    Eigen::VectorXd out(horizon);
    Eigen::VectorXd evolved = obs.coeffs;
    for (int n = 1; n <= horizon; ++n) {
        evolved = sys.K * evolved;
        if (n < reference.rows()) {
            out(n - 1) = std::abs((phi0 * evolved)(0, 0) - reference(n, obs.coord));
        } else {
            out(n - 1) = std::numeric_limits<double>::quiet_NaN();
        }
    }
    return out;
}

void run_bounds(const BoundsArgs& a, RunOutput& run) {
    const GalerkinSystem sys = load_system(a.galerkin);

    if (sys.space == FunctionSpace::RKHS) {
        if (a.x0.empty()) {
            throw_error(ErrorCode::ConfigError, "RKHS bounds require --x0");
        }
        const KernelSpec kernel = kernel_from_descriptor(sys.basis);
        const Eigen::VectorXd x0 = parse_vector(a.x0);
        Eigen::VectorXd g_samples;
        if (a.observable.rfind("coord:", 0) == 0) {
            const int coord = std::stoi(a.observable.substr(6)) - 1;
            if (coord < 0 || coord >= sys.data_X.cols()) {
                throw_error(ErrorCode::ConfigError, "observable coordinate out of range");
            }
            g_samples = sys.data_X.col(coord);
        } else {
            throw_error(ErrorCode::ConfigError,
                        "RKHS bounds support coord:<i> observables only");
        }
        const PfmdQuery query = make_pfmd_query(kernel, sys, x0, -1.0, g_samples);
        const PfmdBounds bounds = pfmd_pointwise_bounds(sys, query, a.horizon);
        std::ofstream out = run.open_csv("bounds.csv");
        out << "step,norm_bound,pointwise_bound,init_component,proj_component\n";
        for (std::size_t i = 0; i < bounds.norm_bounds.steps.size(); ++i) {
            const Eigen::Index j = static_cast<Eigen::Index>(i);
            out << bounds.norm_bounds.steps[i] << "," << bounds.norm_bounds.values(j)
                << "," << bounds.pointwise_bounds.values(j) << ","
                << bounds.norm_bounds.init_components(j) << ","
                << bounds.norm_bounds.proj_components(j) << "\n";
        }
        run.config()["delta"] = query.delta;
        run.config()["g_norm"] = query.g_norm;
        run.config()["rigorous"] = bounds.rigorous;
        return;
    }

    const FittedObservable obs = resolve_observable(sys, a.observable);
    const ErrorSeries min_series = kmd_error_bounds(sys, obs.coeffs, a.horizon);
    const ErrorSeries full_series = kmd_error_bounds_full(sys, obs.coeffs, a.horizon);
    Eigen::VectorXd exact;
    if (!a.reference.empty()) {
        exact = exact_errors_from_reference(sys, obs, read_trajectory_csv(a.reference),
                                            a.horizon);
    }
    std::ofstream out = run.open_csv("bounds.csv");
    write_series_csv(out, min_series, &full_series, exact, obs.init_error, sys);
    run.config()["init_error"] = obs.init_error;
}

struct ExpectedArgs {
    std::string galerkin;
    std::string observable = "coord:1";
    std::string x0;
    int horizon = 20;
    int samples = 100;
    std::uint64_t seed = 0;
    double tau = 1000.0;
    std::string law = "squared";
    Eigen::Index rank = 200;
    std::string basis = "svd";
    std::string reference;
    std::string out = "out";
};

GpSurrogate make_surrogate(const ExpectedArgs& a) {
    GpSurrogate sur;
    sur.tau = a.tau;
    if (a.law == "squared") {
        sur.squared_convention = true;
    } else if (a.law == "direct") {
        sur.squared_convention = false;
    } else {
        throw_error(ErrorCode::ConfigError, "--law must be squared or direct");
    }
    sur.sample_count = a.samples;
    sur.seed = a.seed;
    sur.rank = a.rank;
    if (a.basis == "svd") {
        sur.basis = GpSurrogate::Basis::SvdOfG;
    } else if (a.basis == "pad") {
        sur.basis = GpSurrogate::Basis::PadBasis;
    } else {
        throw_error(ErrorCode::ConfigError, "--basis must be svd or pad");
    }
    return sur;
}

void run_expected(const ExpectedArgs& a, RunOutput& run) {
    const GalerkinSystem sys = load_system(a.galerkin);
    const GpSurrogate sur = make_surrogate(a);
    const std::string provenance =
        "# lambda law: " +
        std::string(sur.squared_convention ? "lambda_j^2" : "lambda_j") + " = exp(-j/" +
        std::to_string(sur.tau) + "), P = " + std::to_string(sur.sample_count) +
        ", seed = " + std::to_string(sur.seed) + ", rank = " + std::to_string(sur.rank);

    if (sys.space == FunctionSpace::RKHS) {
        if (a.x0.empty()) {
            throw_error(ErrorCode::ConfigError, "RKHS expected errors require --x0");
        }
        const KernelSpec kernel = kernel_from_descriptor(sys.basis);
        const Eigen::VectorXd x0 = parse_vector(a.x0);
        Eigen::VectorXd g_samples;
        if (a.observable.rfind("coord:", 0) == 0) {
            const int coord = std::stoi(a.observable.substr(6)) - 1;
            g_samples = sys.data_X.col(coord);
        }
        const PfmdQuery query = make_pfmd_query(kernel, sys, x0, -1.0, g_samples);
        const PfmdExpected expected =
            expected_pfmd_errors(sys, query, a.horizon, sur, g_samples);
        const PfmdBounds strict = pfmd_pointwise_bounds(sys, query, a.horizon);
        std::ofstream out = run.open_csv("expected.csv");
        out << provenance << "\n";
        out << "step,expected_norm,std,norm_bound,expected_pointwise,pointwise_bound\n";
        for (std::size_t i = 0; i < expected.norm_series.steps.size(); ++i) {
            const Eigen::Index j = static_cast<Eigen::Index>(i);
            out << expected.norm_series.steps[i] << "," << expected.norm_series.values(j)
                << "," << expected.norm_series.stds(j) << ","
                << strict.norm_bounds.values(j) << ","
                << expected.pointwise_series.values(j) << ","
                << strict.pointwise_bounds.values(j) << "\n";
        }
        return;
    }

    const FittedObservable obs = resolve_observable(sys, a.observable);
    const ErrorSeries expected = expected_kmd_errors(sys, obs.coeffs, a.horizon, sur);
    const ErrorSeries strict = kmd_error_bounds(sys, obs.coeffs, a.horizon);
    Eigen::VectorXd exact;
    if (!a.reference.empty()) {
        exact = exact_errors_from_reference(sys, obs, read_trajectory_csv(a.reference),
                                            a.horizon);
    }
    std::ofstream out = run.open_csv("expected.csv");
    out << provenance << "\n";
    out << "step,expected,std,bound_min,exact\n";
    for (std::size_t i = 0; i < expected.steps.size(); ++i) {
        const Eigen::Index j = static_cast<Eigen::Index>(i);
        out << expected.steps[i] << "," << expected.values(j) << "," << expected.stds(j)
            << "," << strict.values(j) << ",";
        if (exact.size() > j) out << exact(j);
        out << "\n";
    }
}

struct PredictArgs {
    std::string galerkin;
    std::string x0;
    int horizon = 20;
    std::string out = "out";
};

void run_predict(const PredictArgs& a, RunOutput& run) {
    const GalerkinSystem sys = load_system(a.galerkin);
    if (a.x0.empty()) throw_error(ErrorCode::ConfigError, "predict requires --x0");
    const Eigen::VectorXd x0 = parse_vector(a.x0);
    const Eigen::Index d = sys.data_X.cols();

    std::ofstream out = run.open_csv("predictions.csv");
    out << "step";
    for (Eigen::Index i = 0; i < d; ++i) out << ",pred_x" << i + 1;
    for (Eigen::Index i = 0; i < d; ++i) out << ",bound_x" << i + 1;
    out << "\n";

    if (sys.space == FunctionSpace::L2) {
        const Dictionary dict = dictionary_from_descriptor(sys.basis);
        Eigen::MatrixXd phi0 = dict.evaluate(x0.transpose());
        if (sys.basis_map.size() > 0) phi0 *= sys.basis_map;

        std::vector<FittedObservable> obs;
        std::vector<ErrorSeries> series;
        Eigen::MatrixXd evolved(sys.size(), d);
        for (Eigen::Index i = 0; i < d; ++i) {
            obs.push_back(
                resolve_observable(sys, "coord:" + std::to_string(i + 1)));
            series.push_back(kmd_error_bounds(sys, obs.back().coeffs, a.horizon));
            evolved.col(i) = obs.back().coeffs;
        }
        for (int n = 1; n <= a.horizon; ++n) {
            evolved = sys.K * evolved;
            out << n;
            for (Eigen::Index i = 0; i < d; ++i) out << "," << (phi0 * evolved.col(i))(0, 0);
            for (Eigen::Index i = 0; i < d; ++i) {
                const double init = op_norm_power(sys, n) * obs[static_cast<std::size_t>(i)].init_error;
                out << "," << init + series[static_cast<std::size_t>(i)].values(n - 1);
            }
            out << "\n";
        }
        return;
    }

    const KernelSpec kernel = kernel_from_descriptor(sys.basis);
    std::vector<PfmdBounds> bounds;
    for (Eigen::Index i = 0; i < d; ++i) {
        const PfmdQuery q = make_pfmd_query(kernel, sys, x0, -1.0, sys.data_X.col(i));
        bounds.push_back(pfmd_pointwise_bounds(sys, q, a.horizon));
    }
    const PfmdQuery query = make_pfmd_query(kernel, sys, x0, 1.0);
    // <g_i, phi_j> expands over the data sections.
    Eigen::MatrixXd sections_to_coords = sys.data_X; // N_data x d
    Eigen::MatrixXd coord_weights =
        sys.basis_map.size() > 0
            ? (sys.basis_map.transpose() * sections_to_coords).eval()
            : sections_to_coords;
    Eigen::VectorXd c = query.c;
    for (int n = 1; n <= a.horizon; ++n) {
        c = sys.K * c;
        out << n;
        for (Eigen::Index i = 0; i < d; ++i) out << "," << c.dot(coord_weights.col(i));
        for (Eigen::Index i = 0; i < d; ++i) {
            out << "," << bounds[static_cast<std::size_t>(i)].pointwise_bounds.values(n);
        }
        out << "\n";
    }
    run.config()["rigorous"] = false; // coordinate RKHS norms are estimated
}

struct TuneArgs {
    std::string snapshots;
    Eigen::Index centers = 200;
    std::uint64_t center_seed = 0;
    Eigen::Index rank = 50;
    int horizon = 21;
    int epochs = 500;
    double lr = 1e-2;
    double fd_step = 1e-4;
    double s0 = 0.2;
    double nu0 = 1.0;
    std::string test;
    std::string out = "out";
};

void run_tune(const TuneArgs& a, RunOutput& run) {
    TuningProblem problem;
    problem.train = read_snapshot_csv(a.snapshots);
    problem.centers = sample_centers_from_box(problem.train.X, a.centers, a.center_seed);
    problem.rank = a.rank;
    problem.horizon = a.horizon;
    if (!a.test.empty()) {
        problem.test_trajectories.push_back(read_trajectory_csv(a.test));
    }

    AdamConfig config;
    config.lr = a.lr;
    config.epochs = a.epochs;
    config.fd_step = a.fd_step;
    const TuningResult result = optimize(problem, a.s0, a.nu0, config);

    {
        std::ofstream out = run.open_csv("loss_history.csv");
        out << "epoch,loss,test_l2,test_pointwise\n";
        for (Eigen::Index e = 0; e < result.loss_history.size(); ++e) {
            out << e << "," << result.loss_history(e) << ",";
            if (result.test_l2_history.size() > e) out << result.test_l2_history(e);
            out << ",";
            if (result.test_pointwise_history.size() > e) {
                out << result.test_pointwise_history(e);
            }
            out << "\n";
        }
    }
    json best;
    best["s"] = result.best_s;
    best["nu"] = result.best_nu;
    best["loss"] = result.best_loss;
    std::ofstream out(run.path("best.json"));
    out << best.dump(2) << "\n";
    run.note_file("best.json");
}

// ---------------------------------------------------------------------------
// Option wiring
// ---------------------------------------------------------------------------

// JSON config support: values become defaults, explicit flags override.
std::vector<std::string> inject_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) {
                throw_error(ErrorCode::ConfigError, "--config needs a file argument");
            }
            config_path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                       args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (config_path.empty()) return args;
    if (args.empty()) {
        throw_error(ErrorCode::ConfigError, "--config requires a subcommand");
    }

    std::ifstream in(config_path);
    if (!in) throw_error(ErrorCode::ConfigError, "cannot open config " + config_path);
    json cfg;
    try {
        in >> cfg;
    } catch (const json::exception& e) {
        throw_error(ErrorCode::ConfigError,
                    std::string("config is not valid JSON: ") + e.what());
    }
    if (!cfg.is_object()) {
        throw_error(ErrorCode::ConfigError, "config must be a JSON object");
    }

    // Insert right after the subcommand so later explicit flags win.
    std::vector<std::string> injected;
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
        std::string value;
        if (it.value().is_string()) {
            value = it.value().get<std::string>();
        } else if (it.value().is_boolean()) {
            value = it.value().get<bool>() ? "true" : "false";
        } else if (it.value().is_number()) {
            std::ostringstream ss;
            ss << std::setprecision(17) << it.value().get<double>();
            value = ss.str();
        } else {
            throw_error(ErrorCode::ConfigError,
                        "config field '" + it.key() + "' must be a scalar");
        }
        injected.push_back("--" + it.key() + "=" + value);
    }
    args.insert(args.begin() + 1, injected.begin(), injected.end());
    return args;
}

template <typename T>
CLI::Option* opt(CLI::App* cmd, const std::string& name, T& target,
                 const std::string& desc) {
    return cmd->add_option(name, target, desc)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
}

json echo_pairs(const CLI::App* cmd) {
    json echo = json::object();
    for (const CLI::Option* option : cmd->get_options()) {
        if (option->get_name().rfind("--", 0) != 0) continue;
        if (!option->count() && option->get_default_str().empty()) continue;
        echo[option->get_name().substr(2)] =
            option->count() ? option->results().back() : option->get_default_str();
    }
    return echo;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Data-driven Koopman approximations with computable certificates"};
    app.require_subcommand(1);

    SimulateArgs sim;
    CLI::App* c_sim = app.add_subcommand("simulate", "Generate weighted snapshot data");
    opt(c_sim, "--system", sim.system, "duffing or lorenz63");
    opt(c_sim, "--sampling", sim.sampling, "random or ergodic");
    opt(c_sim, "--dt", sim.dt, "sampling interval (system default when omitted)");
    opt(c_sim, "--M", sim.count, "number of snapshot pairs");
    opt(c_sim, "--seed", sim.seed, "RNG seed for random sampling");
    opt(c_sim, "--box-lo", sim.box_lo, "comma-separated lower corner");
    opt(c_sim, "--box-hi", sim.box_hi, "comma-separated upper corner");
    opt(c_sim, "--x0", sim.x0, "ergodic start state");
    opt(c_sim, "--burn-in", sim.burn_in, "ergodic transient steps to discard");
    opt(c_sim, "--out", sim.out, "output directory");

    IngestArgs ing;
    CLI::App* c_ing = app.add_subcommand("ingest", "Validate and import snapshot CSV");
    opt(c_ing, "--input", ing.input, "input CSV path")->required();
    opt(c_ing, "--mode", ing.mode, "paired or trajectory");
    c_ing->add_flag("--normalize", ing.normalize, "per-column mean/std normalization");
    opt(c_ing, "--out", ing.out, "output directory");

    BuildArgs edm;
    CLI::App* c_edm = app.add_subcommand("edmd", "Assemble the L2 Galerkin system");
    opt(c_edm, "--snapshots", edm.snapshots, "snapshot CSV")->required();
    opt(c_edm, "--dict", edm.dict, "chebyshev, exp-rbf or matern-rbf");
    opt(c_edm, "--degree", edm.degree, "chebyshev per-axis max degree");
    opt(c_edm, "--domain-lo", edm.domain_lo, "chebyshev domain lower corner");
    opt(c_edm, "--domain-hi", edm.domain_hi, "chebyshev domain upper corner");
    opt(c_edm, "--centers", edm.centers, "RBF center count");
    opt(c_edm, "--center-seed", edm.center_seed, "RBF center seed");
    opt(c_edm, "--scale", edm.scale, "RBF scale (default from the data)");
    opt(c_edm, "--order", edm.order, "Matern order nu");
    opt(c_edm, "--reduce", edm.reduce, "none, svd:<r> or pad:<r>");
    opt(c_edm, "--out", edm.out, "output directory");

    BuildArgs ked;
    CLI::App* c_ked = app.add_subcommand("kedmd", "Assemble the RKHS Galerkin system");
    opt(c_ked, "--snapshots", ked.snapshots, "snapshot CSV")->required();
    opt(c_ked, "--scale", ked.scale, "kernel scale sigma (default from the data)");
    opt(c_ked, "--order", ked.order, "Matern order nu");
    opt(c_ked, "--reduce", ked.reduce, "none, svd:<r> or pad:<r>");
    opt(c_ked, "--out", ked.out, "output directory");

    AnglesArgs ang;
    CLI::App* c_ang = app.add_subcommand("angles", "Principal angle diagnostics");
    opt(c_ang, "--galerkin", ang.galerkin, "system directory")->required();
    opt(c_ang, "--cutoff", ang.cutoff, "eigenvalue cutoff (negative = automatic)");
    opt(c_ang, "--out", ang.out, "output directory");

    PadArgs pad;
    CLI::App* c_pad = app.add_subcommand("pad", "Principal angle decomposition");
    opt(c_pad, "--galerkin", pad.galerkin, "system directory")->required();
    opt(c_pad, "--r", pad.r, "retained mode count")->required();
    opt(c_pad, "--cutoff", pad.cutoff, "eigenvalue cutoff (negative = automatic)");
    opt(c_pad, "--out", pad.out, "output directory");

    BoundsArgs bnd;
    CLI::App* c_bnd = app.add_subcommand("bounds", "Multi-step forecast error bounds");
    opt(c_bnd, "--galerkin", bnd.galerkin, "system directory")->required();
    opt(c_bnd, "--observable", bnd.observable, "coord:<i> or coeffs:<file>");
    opt(c_bnd, "--x0", bnd.x0, "start state (RKHS systems)");
    opt(c_bnd, "--horizon", bnd.horizon, "number of steps");
    opt(c_bnd, "--reference", bnd.reference, "trajectory CSV for exact errors");
    opt(c_bnd, "--out", bnd.out, "output directory");

    ExpectedArgs exp;
    CLI::App* c_exp = app.add_subcommand("expected", "Gaussian expected-error surrogates");
    opt(c_exp, "--galerkin", exp.galerkin, "system directory")->required();
    opt(c_exp, "--observable", exp.observable, "coord:<i> or coeffs:<file>");
    opt(c_exp, "--x0", exp.x0, "start state (RKHS systems)");
    opt(c_exp, "--horizon", exp.horizon, "number of steps");
    opt(c_exp, "--P", exp.samples, "Monte Carlo sample count");
    opt(c_exp, "--gp-seed", exp.seed, "surrogate seed");
    opt(c_exp, "--tau", exp.tau, "eigenvalue decay rate");
    opt(c_exp, "--law", exp.law, "squared (lambda_j^2 = e^{-j/tau}) or direct");
    opt(c_exp, "--rank", exp.rank, "surrogate basis rank");
    opt(c_exp, "--basis", exp.basis, "svd or pad");
    opt(c_exp, "--reference", exp.reference, "trajectory CSV for exact errors");
    opt(c_exp, "--out", exp.out, "output directory");

    PredictArgs prd;
    CLI::App* c_prd = app.add_subcommand("predict", "Forecast with bound columns");
    opt(c_prd, "--galerkin", prd.galerkin, "system directory")->required();
    opt(c_prd, "--x0", prd.x0, "start state")->required();
    opt(c_prd, "--horizon", prd.horizon, "number of steps");
    opt(c_prd, "--out", prd.out, "output directory");

    TuneArgs tun;
    CLI::App* c_tun = app.add_subcommand("tune", "Error-bound-driven kernel tuning");
    opt(c_tun, "--snapshots", tun.snapshots, "training snapshot CSV")->required();
    opt(c_tun, "--centers", tun.centers, "RBF center count");
    opt(c_tun, "--center-seed", tun.center_seed, "RBF center seed");
    opt(c_tun, "--r", tun.rank, "SVD reduction rank");
    opt(c_tun, "--H", tun.horizon, "bound horizon");
    opt(c_tun, "--epochs", tun.epochs, "Adam epochs");
    opt(c_tun, "--lr", tun.lr, "Adam learning rate");
    opt(c_tun, "--fd-step", tun.fd_step, "finite-difference step");
    opt(c_tun, "--s0", tun.s0, "initial scale");
    opt(c_tun, "--nu0", tun.nu0, "initial order");
    opt(c_tun, "--test", tun.test, "held-out trajectory CSV");
    opt(c_tun, "--out", tun.out, "output directory");

    try {
        const std::vector<std::string> args = inject_config(argc, argv);
        // CLI11 parses reversed argv-style vectors.
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);

        CLI::App* active = app.get_subcommands().front();
        const std::string name = active->get_name();
        std::string out_dir;
        if (name == "simulate") out_dir = sim.out;
        else if (name == "ingest") out_dir = ing.out;
        else if (name == "edmd") out_dir = edm.out;
        else if (name == "kedmd") out_dir = ked.out;
        else if (name == "angles") out_dir = ang.out;
        else if (name == "pad") out_dir = pad.out;
        else if (name == "bounds") out_dir = bnd.out;
        else if (name == "expected") out_dir = exp.out;
        else if (name == "predict") out_dir = prd.out;
        else out_dir = tun.out;

        // KOOPCERT_OUT supplies the output directory when neither a flag
        // nor the config file named one.
        if (!active->get_option("--out")->count()) {
            if (const char* env = std::getenv("KOOPCERT_OUT")) out_dir = env;
        }

        RunOutput run(name, out_dir, echo_pairs(active));
        if (name == "simulate") run_simulate(sim, run);
        else if (name == "ingest") run_ingest(ing, run);
        else if (name == "edmd") run_edmd(edm, run);
        else if (name == "kedmd") run_kedmd(ked, run);
        else if (name == "angles") run_angles(ang, run);
        else if (name == "pad") run_pad(pad, run);
        else if (name == "bounds") run_bounds(bnd, run);
        else if (name == "expected") run_expected(exp, run);
        else if (name == "predict") run_predict(prd, run);
        else run_tune(tun, run);
        run.finish();
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
