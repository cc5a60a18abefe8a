#pragma once

#include <Eigen/Dense>

#include <string>

namespace koopcert {

enum class Provenance { RandomIID, ErgodicTrajectory, Quadrature, Ingested };

/// Paired state/image samples with quadrature weights. X and Y have one
/// row per pair; Y.row(m) = F(X.row(m)).
struct SnapshotSet {
    Eigen::MatrixXd X;
    Eigen::MatrixXd Y;
    Eigen::VectorXd w;
    Provenance provenance = Provenance::RandomIID;

    Eigen::Index size() const { return X.rows(); }
    Eigen::Index dim() const { return X.cols(); }

    // Shape agreement, strictly positive weights, finite entries.
    void validate() const;
};

// Column-wise normalization applied during ingestion (empty when unused).
struct NormalizationRecord {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;
    bool applied = false;
};

// Paired CSV: header x1,..,xd,y1,..,yd[,w]; missing w means uniform 1/M.
SnapshotSet read_snapshot_csv(const std::string& path);
void write_snapshot_csv(const std::string& path, const SnapshotSet& set);

// Trajectory/ephemeris CSV: one row per time sample with d state columns;
// consecutive rows are paired into (x, y). With normalize set, each column
// is shifted/scaled to zero mean and unit standard deviation first.
struct IngestResult {
    SnapshotSet snapshots;
    NormalizationRecord normalization;
};
IngestResult ingest_trajectory_csv(const std::string& path, bool normalize);

} // namespace koopcert
