#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "grownet/linalg.hpp"

namespace grownet {

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File contents do not follow the CSV schema. `line` is 1-based.
class SchemaError : public IoError {
public:
    SchemaError(const std::string& what, std::size_t line)
        : IoError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct NormalizationStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

/// S samples, one per row: `inputs` is S x n0, `labels` S x nT.
struct Dataset {
    std::string name;
    Matrix inputs;
    Matrix labels;
    std::optional<NormalizationStats> stats;

    std::size_t size() const noexcept { return inputs.rows(); }
    std::size_t input_dim() const noexcept { return inputs.cols(); }
    std::size_t output_dim() const noexcept { return labels.cols(); }

    /// Rows picked by `indices`, in that order.
    Dataset select(std::span<const std::size_t> indices) const;
    /// Rows [begin, end).
    Dataset slice(std::size_t begin, std::size_t end) const;
};

struct DataSplits {
    Dataset train;
    Dataset validation;
    Dataset test;
};

/// Header must read x0..x{n0-1},y0..y{nT-1}. Paths ending in ".csv.gz" are
/// read through zlib.
Dataset load_csv(const std::filesystem::path& path, std::size_t n0, std::size_t nT);

/// Writes the same schema with 17 significant digits, so a save/load pair
/// reproduces every finite double exactly.
void save_csv(const Dataset& data, const std::filesystem::path& path);

struct StandardizeResult {
    Dataset train;
    std::vector<Dataset> others;
    NormalizationStats stats;
    std::vector<std::string> warnings;
};

/// Per-feature zero mean / unit variance fitted on `train` inputs only and
/// applied to every dataset. Zero-variance features keep stddev 1 and produce
/// a warning.
StandardizeResult standardize(const Dataset& train, std::span<const Dataset> others = {});

Matrix apply_normalization(const Matrix& inputs, const NormalizationStats& stats);
Matrix invert_normalization(const Matrix& inputs, const NormalizationStats& stats);

struct TeacherOptions {
    std::size_t hidden = 16;
    double weight_scale = 1.0;
    double noise = 0.0;
};

/// Inputs ~ N(0, I); labels from a seeded random one-hidden-layer tanh
/// teacher y = V tanh(W x + b) plus optional Gaussian label noise.
Dataset gen_gaussian_regression(std::uint64_t seed, std::size_t samples, std::size_t n0,
                                std::size_t nT, const TeacherOptions& teacher = {});

}  // namespace grownet
