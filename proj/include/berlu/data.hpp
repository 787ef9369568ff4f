#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace berlu {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct Split {
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> val_idx;
};

/// Labelled feature matrix (one sample per row) with a train/validation split.
struct Dataset {
    Matrix features;
    std::vector<int> labels;
    int classes = 0;
    Split split;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dims() const noexcept { return static_cast<std::size_t>(features.cols()); }

    /// Throws std::invalid_argument when labels, split, or classes are inconsistent.
    void validate() const;
};

/// Deterministic 80/20 split of n samples from a seeded permutation.
Split split_80_20(std::size_t n, std::uint64_t seed);

/// Two interleaving unit half-circles, n/2 points each, with Gaussian noise.
/// Throws std::invalid_argument for odd n, n < 4, or negative noise.
Dataset gen_two_moons(std::size_t n, double noise, std::uint64_t seed);

/// Two Archimedean spirals of `turns` revolutions, offset by pi.
Dataset gen_spirals(std::size_t n, double turns, double noise, std::uint64_t seed);

// ---------------------------------------------------------------------------
// IDX

class IdxError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};
class IdxMagicMismatch : public IdxError {
    using IdxError::IdxError;
};
class IdxTruncated : public IdxError {
    using IdxError::IdxError;
};
class IdxCountMismatch : public IdxError {
    using IdxError::IdxError;
};

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Reads an IDX image/label pair. Pixels are divided by 255; each image is
/// flattened row-major. `val_fraction` of the samples (deterministic by seed)
/// go to the validation split; the rest are training samples.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 double val_fraction = 0.0, std::uint64_t seed = 0);

/// Writes the canonical IDX encoding of `rows x cols` byte images / byte labels.
void write_idx_images(const std::filesystem::path& path, const std::vector<std::uint8_t>& pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols);
void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels);

/// Subtracts the per-feature mean and divides by the standard deviation
/// measured on the training split.
void standardize(Dataset& ds);

// ---------------------------------------------------------------------------
// CSV interchange: header `y,x0,x1,...`, one row per sample.

void write_csv(std::ostream& os, const Dataset& ds);
/// Every sample is placed in the training split.
Dataset read_csv(std::istream& is);

}  // namespace berlu
