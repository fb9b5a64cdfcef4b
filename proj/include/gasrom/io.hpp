#pragma once

// Snapshot datasets and model files on disk.
//
// Dataset directory (text form):
//   meta.txt          key = value lines, see write_dataset
//   traj_<k>.csv      header "t,x_1..,u_1..,y_1.."; one row per sample, %.17g
//   xdot_<k>.csv      optional exact derivatives, header "t,xdot_1.."
//   output_map.csv    optional p x n matrix, one row per line
// Binary twin: dataset.bin (little-endian), layout documented in io.cpp.
//
// Model file: a single binary container (magic, version, key/value metadata,
// named float64 arrays) plus optional CSV twins in <path>.csv/.

#include <filesystem>
#include <map>
#include <string>

#include "gasrom/pipeline.hpp"

namespace gasrom {

enum class DatasetFormat { kText, kBinary };

void write_dataset(const std::filesystem::path& dir, const SnapshotDataset& d,
                   DatasetFormat format = DatasetFormat::kText);

struct DatasetReadOptions {
  /// Pre-project states onto this many leading POD modes on ingest: 0 = off,
  /// negative = automatic (200 modes when n > 200).
  Index pre_project = -1;
  /// Receives the pre-projection basis V (n x k) when one is applied.
  Matrix* projection_basis = nullptr;
};

/// Reads dataset.bin when present, otherwise the text form. Throws
/// SchemaError naming the file, the field and the line or byte offset.
SnapshotDataset read_dataset(const std::filesystem::path& dir, const DatasetReadOptions& opts = {});

/// Replaces states x by V^T x (n -> k) with V the leading k POD modes of the
/// states; outputs are kept and the output map becomes C V (or V).
SnapshotDataset pre_project(const SnapshotDataset& d, Index k, Matrix* basis = nullptr);

struct ModelFile {
  RomModel model;
  std::map<std::string, std::string> meta;  // method, version, free-form notes
};

void save_model(const std::filesystem::path& path, const RomModel& m,
                const std::map<std::string, std::string>& meta = {}, bool csv_twins = true);
/// Throws SchemaError for malformed files.
ModelFile load_model(const std::filesystem::path& path);

/// Writes a matrix as CSV with %.17g entries.
void write_matrix_csv(const std::filesystem::path& path, const Matrix& M);
Matrix read_matrix_csv(const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace gasrom
