#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace knnmode {

// Immutable point set with coordinates bounded by |x| <= 1/2.
//
// Point indices i, j are 0-based. Neighbor ranks k are 1-based (k = 1 is the
// nearest neighbor), matching the usual k-NN convention. Distances are the
// dimension-averaged squared Euclidean metric, so they live in [0, 1].
class Dataset {
public:
    // Normalizes: shift by the global midrange, scale by the global range.
    // A zero-range dataset (all points identical) maps to all-zeros.
    static Dataset from_points(std::vector<double> data, std::size_t n, std::size_t m);

    // Accepts coordinates as-is; throws ConfigError if any |x| > 1/2.
    static Dataset from_normalized(std::vector<double> data, std::size_t n, std::size_t m);

    std::size_t size() const { return n_; }
    std::size_t dim() const { return m_; }

    std::span<const double> point(std::size_t i) const {
        return {data_.data() + i * m_, m_};
    }

    double coord(std::size_t i, std::size_t p) const { return data_[i * m_ + p]; }

    // (1/m) * sum_p ([x_i]_p - [x_j]_p)^2. Requires i != j.
    double exact_distance(std::size_t i, std::size_t j) const;

    // k-th order statistic of {exact_distance(i, j) : j != i}, k in 1..n-1.
    double exact_knn_distance(std::size_t i, std::size_t k) const;

    // All n-1 distances from point i, sorted ascending.
    std::vector<double> sorted_distances(std::size_t i) const;

    // argmin_i exact_knn_distance(i, k); lowest index wins ties.
    std::size_t brute_force_mode(std::size_t k) const;

    // New dataset containing the selected rows (no renormalization).
    Dataset subset(const std::vector<std::size_t>& rows) const;

    const std::vector<double>& raw() const { return data_; }

private:
    Dataset(std::vector<double> data, std::size_t n, std::size_t m)
        : data_(std::move(data)), n_(n), m_(m) {}

    std::vector<double> data_;  // row-major n x m
    std::size_t n_ = 0;
    std::size_t m_ = 0;
};

// Local neighbor index j in 0..n-2 <-> global index, skipping the reference i.
inline std::size_t neighbor_to_global(std::size_t i, std::size_t j) {
    return j < i ? j : j + 1;
}

inline std::size_t global_to_neighbor(std::size_t i, std::size_t g) {
    return g < i ? g : g - 1;
}

enum class DataFormat { kCsv, kRawBinary };

// CSV: decimal floats, one point per row, no header.
// Raw binary: uint64 LE n, uint64 LE m, then n*m float64 LE row-major.
Dataset load_dataset(const std::filesystem::path& path, DataFormat format);
void save_dataset(const Dataset& ds, const std::filesystem::path& path, DataFormat format);

enum class SyntheticFamily { kUniformCube, kGaussianClusters, kBinaryHypercube, kLineWithGaps };

SyntheticFamily parse_family(const std::string& name);
std::string family_name(SyntheticFamily family);

struct SyntheticSpec {
    SyntheticFamily family = SyntheticFamily::kLineWithGaps;
    std::size_t n = 0;
    std::size_t m = 1;
    double gap_scale = 1.0;
    uint64_t seed = 0;
};

Dataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace knnmode
