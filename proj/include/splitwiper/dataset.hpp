#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "splitwiper/tensor.hpp"

namespace splitwiper {

struct Dataset {
    Tensor features;                   // n x d
    std::vector<std::uint32_t> labels; // length n, each < class_count
    std::uint32_t class_count = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols(); }
};

/// Gaussian clusters: one seeded mean per class on the unit hypersphere
/// scaled by 4, per-class spread as standard deviation. Rows are laid out
/// class-major (all of class 0 first). Deterministic under `seed`.
Dataset gen_blobs(std::uint32_t class_count, std::size_t dims,
                  std::size_t samples_per_class, double spread,
                  std::uint64_t seed);

/// Rectangular numeric CSV with a header row; the named column holds integer
/// labels, all other columns become features in file order. class_count is
/// max label + 1. Ragged or non-numeric rows raise ParseError with the
/// 1-based physical line number.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column);

/// Dump mirrors the CSV input format: header f0..f{d-1},label then one row
/// per sample, 17 significant digits so a round-trip is lossless.
void save_csv(const Dataset& ds, const std::filesystem::path& path);

}  // namespace splitwiper
