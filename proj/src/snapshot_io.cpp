#include "koopcert/snapshots.hpp"
#include "koopcert/errors.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

namespace koopcert {

void SnapshotSet::validate() const {
    if (X.rows() != Y.rows() || X.cols() != Y.cols()) {
        throw_error(ErrorCode::DimensionMismatch, "SnapshotSet: X and Y shapes differ");
    }
    if (w.size() != X.rows()) {
        throw_error(ErrorCode::DimensionMismatch, "SnapshotSet: weight count mismatch");
    }
    if (!X.allFinite() || !Y.allFinite() || !w.allFinite()) {
        throw_error(ErrorCode::NonFinite, "SnapshotSet: non-finite entries");
    }
    if ((w.array() <= 0.0).any()) {
        throw_error(ErrorCode::DataError, "SnapshotSet: weights must be positive");
    }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

double parse_cell(const std::string& cell, int row, std::size_t col) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(cell, &pos);
        while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
        if (pos != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw_error(ErrorCode::SchemaError,
                    "CSV: cannot parse value at row " + std::to_string(row) + ", column " +
                        std::to_string(col + 1) + ": '" + cell + "'");
    }
}

std::vector<std::vector<double>> read_numeric_rows(std::ifstream& in, std::size_t ncols) {
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != ncols) {
            throw_error(ErrorCode::SchemaError,
                        "CSV: row " + std::to_string(lineno) + " has " +
                            std::to_string(cells.size()) + " columns, expected " +
                            std::to_string(ncols));
        }
        std::vector<double> vals(ncols);
        for (std::size_t c = 0; c < ncols; ++c) vals[c] = parse_cell(cells[c], lineno, c);
        rows.push_back(std::move(vals));
    }
    return rows;
}

} // namespace

SnapshotSet read_snapshot_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_error(ErrorCode::DataError, "cannot open " + path);
    std::string header;
    if (!std::getline(in, header)) {
        throw_error(ErrorCode::SchemaError, path + ": empty file");
    }
    const auto names = split_csv_line(header);
    // Header x1..xd,y1..yd[,w]
    bool has_w = !names.empty() && names.back() == "w";
    const std::size_t paired = names.size() - (has_w ? 1 : 0);
    if (paired == 0 || paired % 2 != 0) {
        throw_error(ErrorCode::SchemaError,
                    path + ": header must be x1..xd,y1..yd[,w], got " + header);
    }
    const std::size_t d = paired / 2;
    for (std::size_t i = 0; i < d; ++i) {
        if (names[i] != "x" + std::to_string(i + 1) ||
            names[d + i] != "y" + std::to_string(i + 1)) {
            throw_error(ErrorCode::SchemaError,
                        path + ": unexpected column name '" + names[i] + "' in header");
        }
    }

    const auto rows = read_numeric_rows(in, names.size());
    const Eigen::Index M = static_cast<Eigen::Index>(rows.size());
    if (M == 0) throw_error(ErrorCode::SchemaError, path + ": no data rows");

    SnapshotSet set;
    set.X.resize(M, static_cast<Eigen::Index>(d));
    set.Y.resize(M, static_cast<Eigen::Index>(d));
    set.w.resize(M);
    for (Eigen::Index m = 0; m < M; ++m) {
        for (std::size_t i = 0; i < d; ++i) {
            set.X(m, static_cast<Eigen::Index>(i)) = rows[m][i];
            set.Y(m, static_cast<Eigen::Index>(i)) = rows[m][d + i];
        }
        set.w(m) = has_w ? rows[m][2 * d] : 1.0 / static_cast<double>(M);
    }
    set.provenance = Provenance::Ingested;
    set.validate();
    return set;
}

void write_snapshot_csv(const std::string& path, const SnapshotSet& set) {
    set.validate();
    std::ofstream out(path);
    if (!out) throw_error(ErrorCode::DataError, "cannot write " + path);
    out << std::setprecision(17);
    const Eigen::Index d = set.dim();
    for (Eigen::Index i = 0; i < d; ++i) out << "x" << (i + 1) << ",";
    for (Eigen::Index i = 0; i < d; ++i) out << "y" << (i + 1) << ",";
    out << "w\n";
    for (Eigen::Index m = 0; m < set.size(); ++m) {
        for (Eigen::Index i = 0; i < d; ++i) out << set.X(m, i) << ",";
        for (Eigen::Index i = 0; i < d; ++i) out << set.Y(m, i) << ",";
        out << set.w(m) << "\n";
    }
}

IngestResult ingest_trajectory_csv(const std::string& path, bool normalize) {
    std::ifstream in(path);
    if (!in) throw_error(ErrorCode::DataError, "cannot open " + path);
    std::string header;
    if (!std::getline(in, header)) {
        throw_error(ErrorCode::SchemaError, path + ": empty file");
    }
    const auto names = split_csv_line(header);
    const std::size_t d = names.size();
    if (d == 0) throw_error(ErrorCode::SchemaError, path + ": empty header");

    const auto rows = read_numeric_rows(in, d);
    if (rows.size() < 2) {
        throw_error(ErrorCode::SchemaError,
                    path + ": trajectory mode needs at least 2 rows");
    }

    Eigen::MatrixXd traj(static_cast<Eigen::Index>(rows.size()),
                         static_cast<Eigen::Index>(d));
    for (Eigen::Index r = 0; r < traj.rows(); ++r)
        for (Eigen::Index c = 0; c < traj.cols(); ++c)
            traj(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];

    IngestResult result;
    if (normalize) {
        result.normalization.applied = true;
        result.normalization.mean = traj.colwise().mean();
        Eigen::VectorXd var =
            (traj.rowwise() - result.normalization.mean.transpose()).array().square()
                .colwise().mean();
        result.normalization.std = var.array().sqrt();
        if ((result.normalization.std.array() <= 0.0).any()) {
            throw_error(ErrorCode::DegenerateData,
                        path + ": constant column cannot be normalized");
        }
        traj = (traj.rowwise() - result.normalization.mean.transpose()).array().rowwise() /
               result.normalization.std.transpose().array();
    }

    const Eigen::Index M = traj.rows() - 1;
    result.snapshots.X = traj.topRows(M);
    result.snapshots.Y = traj.bottomRows(M);
    result.snapshots.w = Eigen::VectorXd::Constant(M, 1.0 / static_cast<double>(M));
    result.snapshots.provenance = Provenance::Ingested;
    result.snapshots.validate();
    return result;
}

} // namespace koopcert
