#include "koopcert/serialize.hpp"
#include "koopcert/errors.hpp"

#include <json.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

namespace koopcert {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= bytes[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

void write_matrix_binary(const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw_error(ErrorCode::DataError, "cannot write " + path);
    const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
    const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
    out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    // Row-major payload.
    std::vector<double> buf(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            buf[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(double)));
    if (!out) throw_error(ErrorCode::DataError, "failed writing " + path);
}

Eigen::MatrixXd read_matrix_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_error(ErrorCode::DataError, "cannot open " + path);
    std::uint64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    if (!in || rows > (1ULL << 32) || cols > (1ULL << 32)) {
        throw_error(ErrorCode::DataError, path + ": corrupt header");
    }
    std::vector<double> buf(static_cast<std::size_t>(rows * cols));
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(double)));
    if (!in) throw_error(ErrorCode::DataError, path + ": truncated payload");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            m(r, c) = buf[static_cast<std::size_t>(r * m.cols() + c)];
    return m;
}

namespace {

std::uint64_t matrix_checksum(const Eigen::MatrixXd& m) {
    std::vector<double> buf(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            buf[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
    return fnv1a(buf.data(), buf.size() * sizeof(double));
}

struct NamedMatrix {
    const char* name;
    const Eigen::MatrixXd* matrix;
};

} // namespace

void save_system(const std::string& dir, const GalerkinSystem& sys) {
    fs::create_directories(dir);
    const Eigen::MatrixXd w_as_matrix = sys.data_w;
    const NamedMatrix entries[] = {
        {"G", &sys.G},           {"A", &sys.A},           {"L", &sys.L},
        {"K", &sys.K},           {"X", &sys.data_X},      {"Y", &sys.data_Y},
        {"w", &w_as_matrix},     {"basis_map", &sys.basis_map},
    };

    json manifest;
    manifest["format"] = "koopcert-galerkin-v1";
    manifest["space"] = sys.space == FunctionSpace::L2 ? "L2" : "RKHS";
    manifest["size"] = static_cast<std::int64_t>(sys.size());
    manifest["rank"] = static_cast<std::int64_t>(sys.rank);
    manifest["rank_deficient"] = sys.rank_deficient;
    if (!sys.basis.empty()) {
        manifest["basis"] = json::parse(sys.basis, nullptr, false);
        if (manifest["basis"].is_discarded()) manifest["basis"] = sys.basis;
    }

    json files = json::object();
    for (const auto& entry : entries) {
        if (entry.matrix->size() == 0) continue;
        const std::string fname = std::string(entry.name) + ".bin";
        write_matrix_binary((fs::path(dir) / fname).string(), *entry.matrix);
        char hex[17];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(matrix_checksum(*entry.matrix)));
        files[entry.name] = {{"file", fname},
                             {"rows", static_cast<std::int64_t>(entry.matrix->rows())},
                             {"cols", static_cast<std::int64_t>(entry.matrix->cols())},
                             {"fnv1a", std::string(hex)}};
    }
    manifest["matrices"] = files;

    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw_error(ErrorCode::DataError, "cannot write manifest in " + dir);
    out << manifest.dump(2) << "\n";
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
    const Eigen::Index nr = static_cast<Eigen::Index>(rows.size());
    if (nr == 0) return {};
    const Eigen::Index nc = static_cast<Eigen::Index>(rows[0].size());
    Eigen::MatrixXd m(nr, nc);
    for (Eigen::Index r = 0; r < nr; ++r)
        for (Eigen::Index c = 0; c < nc; ++c)
            m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]
                          .get<double>();
    return m;
}

} // namespace

std::string describe_dictionary(const Dictionary& dict) {
    json j;
    switch (dict.kind()) {
    case Dictionary::Kind::ChebyshevTensor:
        j["kind"] = "chebyshev_tensor";
        j["degrees"] = dict.degrees();
        j["domain"] = matrix_to_json(dict.domain());
        break;
    case Dictionary::Kind::ExponentialRBF:
        j["kind"] = "exponential_rbf";
        j["scale"] = dict.scale();
        j["centers"] = matrix_to_json(dict.centers());
        break;
    case Dictionary::Kind::MaternBesselRBF:
        j["kind"] = "matern_bessel_rbf";
        j["scale"] = dict.scale();
        j["order"] = dict.order();
        j["centers"] = matrix_to_json(dict.centers());
        break;
    }
    return j.dump();
}

Dictionary dictionary_from_descriptor(const std::string& descriptor) {
    json j = json::parse(descriptor, nullptr, false);
    if (j.is_discarded() || !j.contains("kind")) {
        throw_error(ErrorCode::DataError, "bad dictionary descriptor");
    }
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "chebyshev_tensor") {
        return Dictionary::chebyshev_tensor(j.at("degrees").get<std::vector<int>>(),
                                            matrix_from_json(j.at("domain")));
    }
    if (kind == "exponential_rbf") {
        return Dictionary::exponential_rbf(matrix_from_json(j.at("centers")),
                                           j.at("scale").get<double>());
    }
    if (kind == "matern_bessel_rbf") {
        return Dictionary::matern_bessel_rbf(matrix_from_json(j.at("centers")),
                                             j.at("scale").get<double>(),
                                             j.at("order").get<double>());
    }
    throw_error(ErrorCode::DataError, "unknown dictionary kind: " + kind);
}

std::string describe_kernel(const KernelSpec& kernel) {
    json j;
    j["kind"] = "matern_bessel_kernel";
    j["scale"] = kernel.scale;
    j["order"] = kernel.order;
    return j.dump();
}

KernelSpec kernel_from_descriptor(const std::string& descriptor) {
    json j = json::parse(descriptor, nullptr, false);
    if (j.is_discarded() || j.value("kind", "") != "matern_bessel_kernel") {
        throw_error(ErrorCode::DataError, "bad kernel descriptor");
    }
    return KernelSpec{j.at("scale").get<double>(), j.at("order").get<double>()};
}

GalerkinSystem load_system(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw_error(ErrorCode::DataError, dir + ": missing manifest.json");
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw_error(ErrorCode::DataError, dir + ": bad manifest: " + e.what());
    }
    if (manifest.value("format", "") != "koopcert-galerkin-v1") {
        throw_error(ErrorCode::DataError, dir + ": unknown manifest format");
    }

    GalerkinSystem sys;
    sys.space = manifest.value("space", "L2") == "RKHS" ? FunctionSpace::RKHS
                                                        : FunctionSpace::L2;
    sys.rank = manifest.value("rank", 0);
    sys.rank_deficient = manifest.value("rank_deficient", false);
    if (manifest.contains("basis")) {
        sys.basis = manifest["basis"].is_string() ? manifest["basis"].get<std::string>()
                                                  : manifest["basis"].dump();
    }

    auto load = [&](const char* name, Eigen::MatrixXd& target, bool required) {
        if (!manifest["matrices"].contains(name)) {
            if (required) {
                throw_error(ErrorCode::DataError,
                            dir + ": manifest missing matrix " + name);
            }
            return;
        }
        const json& meta = manifest["matrices"][name];
        target = read_matrix_binary(
            (fs::path(dir) / meta.at("file").get<std::string>()).string());
        char hex[17];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(matrix_checksum(target)));
        if (meta.at("fnv1a").get<std::string>() != hex) {
            throw_error(ErrorCode::DataError,
                        dir + ": checksum mismatch for matrix " + name);
        }
        if (meta.at("rows").get<std::int64_t>() != target.rows() ||
            meta.at("cols").get<std::int64_t>() != target.cols()) {
            throw_error(ErrorCode::DataError, dir + ": shape mismatch for matrix " + name);
        }
    };

    load("G", sys.G, true);
    load("A", sys.A, true);
    load("L", sys.L, true);
    load("K", sys.K, true);
    load("X", sys.data_X, false);
    load("Y", sys.data_Y, false);
    Eigen::MatrixXd w;
    load("w", w, false);
    if (w.size() > 0) sys.data_w = w.col(0);
    load("basis_map", sys.basis_map, false);
    return sys;
}

} // namespace koopcert
