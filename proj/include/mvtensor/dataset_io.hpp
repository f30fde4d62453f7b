#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mvtensor/dataset.hpp"

namespace mvtensor {

enum class MatrixFormat { Csv, Mvb };

MatrixFormat parse_matrix_format(const std::string &s);
std::string to_string(MatrixFormat f);

// CSV: headerless, comma separated, shortest round-trip decimal.
// MVB: "MVB1", u32 LE rows, u32 LE cols, rows*cols f64 LE row-major.
Matrix load_matrix(const std::filesystem::path &path, MatrixFormat format);
void save_matrix(const std::filesystem::path &path, MatrixFormat format, const Matrix &m);

std::string matrix_to_csv(const Matrix &m);
Matrix matrix_from_csv(const std::string &text, const std::string &origin = "<csv>");

/// One integer label per line.
LabelVector load_labels(const std::filesystem::path &path);
void save_labels(const std::filesystem::path &path, const LabelVector &labels);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path &path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path &path, const std::string &content);
std::string read_file(const std::filesystem::path &path);

struct ManifestView {
    std::string name;
    std::string path; ///< relative paths resolve against the manifest directory
    Index dim = 0;
    MatrixFormat format = MatrixFormat::Csv;
    std::string checksum; ///< optional sha256 hex
};

struct Manifest {
    std::string name;
    Index n_samples = 0;
    std::vector<ManifestView> views;
    std::string labels_path;
    std::string labels_checksum;

    static Manifest parse(const std::string &json_text);
    std::string to_json() const;
};

/// Loads every view in manifest order, validating shapes, finiteness and
/// checksums.
MultiViewDataset load_manifest(const std::filesystem::path &path);

/// Writes each view as view_<v>.<ext>, labels.csv when present, and a
/// manifest.json with checksums. Returns the manifest path.
std::filesystem::path save_dataset(const std::filesystem::path &dir, const MultiViewDataset &d,
                                   MatrixFormat format = MatrixFormat::Csv);

struct BlobSpec {
    Index n_per_cluster = 100;
    Index clusters = 3;
    std::vector<Index> dims{10, 10, 10};       ///< one entry per view
    std::vector<double> noise_sigmas{0.5, 0.5, 0.5};
    std::uint64_t seed = 0;
};

/// Shared cluster assignment; view v maps one-hot cluster centers through
/// an independent Gaussian random matrix and adds N(0, sigma_v^2) noise.
/// Sample order is shuffled. Deterministic given the seed.
MultiViewDataset make_synthetic_blobs(const BlobSpec &spec);

} // namespace mvtensor
