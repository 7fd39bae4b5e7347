#include "knnmode/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "knnmode/detail/hash_rng.hpp"
#include "knnmode/errors.hpp"

namespace knnmode {

namespace {

void check_shape(std::size_t n, std::size_t m, std::size_t len) {
    if (n < 2) throw ConfigError("dataset needs at least 2 points, got " + std::to_string(n));
    if (m < 1) throw ConfigError("dataset needs at least 1 dimension");
    if (len != n * m) throw ConfigError("data length does not match n*m");
}

}  // namespace

Dataset Dataset::from_points(std::vector<double> data, std::size_t n, std::size_t m) {
    check_shape(n, m, data.size());
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : data) {
        if (!std::isfinite(v)) throw ConfigError("non-finite coordinate");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double range = hi - lo;
    if (range == 0.0) {
        std::fill(data.begin(), data.end(), 0.0);
    } else {
        // (x - min)/range - 1/2 == (x - midrange)/range, but the extremes land
        // exactly on +-1/2, which makes normalization idempotent bit-for-bit.
        for (double& v : data) v = (v - lo) / range - 0.5;
    }
    return Dataset(std::move(data), n, m);
}

Dataset Dataset::from_normalized(std::vector<double> data, std::size_t n, std::size_t m) {
    check_shape(n, m, data.size());
    for (double v : data) {
        if (!std::isfinite(v) || std::abs(v) > 0.5 + 1e-12)
            throw ConfigError("coordinate outside [-1/2, 1/2]");
    }
    for (double& v : data) v = std::clamp(v, -0.5, 0.5);
    return Dataset(std::move(data), n, m);
}

double Dataset::exact_distance(std::size_t i, std::size_t j) const {
    if (i == j) throw ConfigError("exact_distance requires i != j");
    if (i >= n_ || j >= n_) throw ConfigError("point index out of range");
    const double* a = data_.data() + i * m_;
    const double* b = data_.data() + j * m_;
    double acc = 0.0;
    for (std::size_t p = 0; p < m_; ++p) {
        const double d = a[p] - b[p];
        acc += d * d;
    }
    return acc / static_cast<double>(m_);
}

std::vector<double> Dataset::sorted_distances(std::size_t i) const {
    std::vector<double> d;
    d.reserve(n_ - 1);
    for (std::size_t g = 0; g < n_; ++g)
        if (g != i) d.push_back(exact_distance(i, g));
    std::sort(d.begin(), d.end());
    return d;
}

double Dataset::exact_knn_distance(std::size_t i, std::size_t k) const {
    if (k < 1 || k > n_ - 1) throw ConfigError("k out of range 1..n-1");
    std::vector<double> d;
    d.reserve(n_ - 1);
    for (std::size_t g = 0; g < n_; ++g)
        if (g != i) d.push_back(exact_distance(i, g));
    std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
    return d[k - 1];
}

std::size_t Dataset::brute_force_mode(std::size_t k) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_; ++i) {
        const double d = exact_knn_distance(i, k);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
    std::vector<double> out;
    out.reserve(rows.size() * m_);
    for (std::size_t r : rows) {
        if (r >= n_) throw ConfigError("subset row out of range");
        out.insert(out.end(), data_.begin() + r * m_, data_.begin() + (r + 1) * m_);
    }
    return from_normalized(std::move(out), rows.size(), m_);
}

// ---- file formats ----

namespace {

std::vector<double> parse_csv(std::istream& in, std::size_t& n, std::size_t& m) {
    std::vector<double> data;
    std::string line;
    std::size_t row = 0;
    m = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() && in.eof()) break;
        std::size_t cols = 0;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            std::string cell = line.substr(pos, comma - pos);
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            while (end && *end == ' ') ++end;
            if (cell.empty() || end == cell.c_str() || (end && *end != '\0' && *end != '\r'))
                throw ParseError("row " + std::to_string(row) + ": bad value '" + cell + "'");
            if (!std::isfinite(v))
                throw ParseError("row " + std::to_string(row) + ": non-finite value");
            data.push_back(v);
            ++cols;
            pos = comma + 1;
            if (comma == line.size()) break;
        }
        if (m == 0)
            m = cols;
        else if (cols != m)
            throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(m) +
                             " columns, got " + std::to_string(cols));
    }
    if (m == 0) throw ParseError("empty dataset file");
    n = data.size() / m;
    return data;
}

std::vector<double> parse_raw(std::istream& in, std::size_t& n, std::size_t& m) {
    uint64_t hdr[2];
    in.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
    if (!in) throw ParseError("truncated binary header");
    n = static_cast<std::size_t>(hdr[0]);
    m = static_cast<std::size_t>(hdr[1]);
    if (n == 0 || m == 0 || n > (1ull << 32) || m > (1ull << 32))
        throw ParseError("implausible binary header");
    std::vector<double> data(n * m);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw ParseError("truncated binary payload");
    for (double v : data)
        if (!std::isfinite(v)) throw ParseError("non-finite value in binary payload");
    return data;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, DataFormat format) {
    std::ifstream in(path, format == DataFormat::kRawBinary ? std::ios::binary : std::ios::in);
    if (!in) throw ConfigError("cannot open dataset file: " + path.string());
    std::size_t n = 0, m = 0;
    std::vector<double> data = format == DataFormat::kCsv ? parse_csv(in, n, m) : parse_raw(in, n, m);
    return Dataset::from_points(std::move(data), n, m);
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path, DataFormat format) {
    std::ofstream out(path, format == DataFormat::kRawBinary ? std::ios::binary : std::ios::out);
    if (!out) throw ConfigError("cannot write dataset file: " + path.string());
    if (format == DataFormat::kRawBinary) {
        const uint64_t hdr[2] = {ds.size(), ds.dim()};
        out.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
        out.write(reinterpret_cast<const char*>(ds.raw().data()),
                  static_cast<std::streamsize>(ds.raw().size() * sizeof(double)));
    } else {
        char buf[64];
        for (std::size_t i = 0; i < ds.size(); ++i) {
            for (std::size_t p = 0; p < ds.dim(); ++p) {
                std::snprintf(buf, sizeof(buf), "%.17g", ds.coord(i, p));
                if (p) out << ',';
                out << buf;
            }
            out << '\n';
        }
    }
    if (!out) throw ConfigError("I/O failure writing " + path.string());
}

// ---- synthetic families ----

SyntheticFamily parse_family(const std::string& name) {
    if (name == "uniform-cube") return SyntheticFamily::kUniformCube;
    if (name == "gaussian-clusters") return SyntheticFamily::kGaussianClusters;
    if (name == "binary-hypercube") return SyntheticFamily::kBinaryHypercube;
    if (name == "line-with-gaps") return SyntheticFamily::kLineWithGaps;
    throw ConfigError("unknown synthetic family: " + name);
}

std::string family_name(SyntheticFamily family) {
    switch (family) {
        case SyntheticFamily::kUniformCube: return "uniform-cube";
        case SyntheticFamily::kGaussianClusters: return "gaussian-clusters";
        case SyntheticFamily::kBinaryHypercube: return "binary-hypercube";
        case SyntheticFamily::kLineWithGaps: return "line-with-gaps";
    }
    return "?";
}

namespace {

Dataset gen_uniform_cube(const SyntheticSpec& s) {
    if (s.gap_scale > 1.0)
        throw ConfigError("uniform-cube: gap-scale > 1 would leave the unit cube");
    detail::SplitMix64 rng(detail::hash3(s.seed, 0x11, s.n * 131 + s.m));
    std::vector<double> data(s.n * s.m);
    for (double& v : data) v = (rng.next_u01() - 0.5) * s.gap_scale;
    return Dataset::from_normalized(std::move(data), s.n, s.m);
}

Dataset gen_gaussian_clusters(const SyntheticSpec& s) {
    detail::SplitMix64 rng(detail::hash3(s.seed, 0x22, s.n * 131 + s.m));
    const std::size_t n_clusters = std::max<std::size_t>(2, s.n / 10);
    std::vector<double> centers(n_clusters * s.m);
    for (double& v : centers) v = (rng.next_u01() - 0.5) * 0.8 * s.gap_scale;
    const double spread = 0.05;
    std::vector<double> data(s.n * s.m);
    for (std::size_t i = 0; i < s.n; ++i) {
        const std::size_t c = i % n_clusters;
        for (std::size_t p = 0; p < s.m; ++p) {
            const double g = detail::gaussian(rng.next());
            data[i * s.m + p] = centers[c * s.m + p] + spread * g;
        }
    }
    return Dataset::from_points(std::move(data), s.n, s.m);
}

Dataset gen_binary_hypercube(const SyntheticSpec& s) {
    // gap-scale is ignored: coordinates are pinned to +-1/2 by definition.
    if (s.m < 64 && s.n > (1ull << s.m))
        throw ConfigError("binary-hypercube: n exceeds 2^m distinct points");
    detail::SplitMix64 rng(detail::hash3(s.seed, 0x33, s.n * 131 + s.m));
    std::vector<std::vector<uint8_t>> seen;
    std::vector<double> data(s.n * s.m);
    for (std::size_t i = 0; i < s.n; ++i) {
        std::vector<uint8_t> bits(s.m);
        for (int attempt = 0;; ++attempt) {
            if (attempt > 4096)
                throw ConfigError("binary-hypercube: failed to draw distinct points");
            for (auto& b : bits) b = static_cast<uint8_t>(rng.next() & 1);
            if (std::find(seen.begin(), seen.end(), bits) == seen.end()) break;
        }
        seen.push_back(bits);
        for (std::size_t p = 0; p < s.m; ++p) data[i * s.m + p] = bits[p] ? 0.5 : -0.5;
    }
    return Dataset::from_normalized(std::move(data), s.n, s.m);
}

// Structured line in coordinate 0 (other coordinates are zero).
//
// Layout, in units of the block pitch: a 4-point cluster {0, 0.5, 5, 9}*u
// whose interior point is the k=3 mode by a wide margin, then ceil((n-4)/3)
// blocks of up to 3 points at pitch 1. Each block member sits at
// base + c*(role + jitter), so gap-scale c multiplies every separation of the
// jittered structure; the enclosing span is independent of c, which keeps the
// scaled gaps proportional after the points are mapped into [-1/2, 1/2].
Dataset gen_line_with_gaps(const SyntheticSpec& s) {
    const double c = s.gap_scale;
    detail::SplitMix64 rng(detail::hash3(s.seed, 0x44, s.n * 131 + s.m));
    std::vector<double> pos(s.n);

    if (s.n <= 6) {
        // Plain chain with centered, scaled separation jitter; span stays (n-1).
        std::vector<double> eps(s.n - 1);
        double mean = 0.0;
        for (std::size_t j = 0; j < eps.size(); ++j) {
            eps[j] = (rng.next_u01() - 0.5) * 0.9;
            mean += eps[j];
        }
        mean /= static_cast<double>(eps.size());
        if (c * 0.9 >= 2.0) throw ConfigError("line-with-gaps: gap-scale too large for n <= 6");
        pos[0] = 0.0;
        for (std::size_t j = 0; j < eps.size(); ++j) {
            const double sep = 1.0 + c * (eps[j] - mean);
            if (sep <= 0.0) throw ConfigError("line-with-gaps: gap-scale collapses a separation");
            pos[j + 1] = pos[j] + sep;
        }
        const double span = static_cast<double>(s.n - 1);
        for (double& p : pos) p = p / span - 0.5;
    } else {
        constexpr double kClusterUnit = 0.0825;
        constexpr double kClusterGap = 1.2;
        constexpr double kRole = 0.125;
        constexpr double kJitter = 0.055;
        if (c * (kRole + kJitter) >= 0.24)
            throw ConfigError("line-with-gaps: gap-scale too large, blocks would overlap");

        const double cluster_off[4] = {0.0, 0.5, 5.0, 9.0};
        for (int i = 0; i < 4; ++i) pos[i] = cluster_off[i] * kClusterUnit;

        const std::size_t members = s.n - 4;
        const std::size_t blocks = (members + 2) / 3;
        const double first_base = 9.0 * kClusterUnit + kClusterGap;
        for (std::size_t i = 0; i < members; ++i) {
            const std::size_t block = i / 3;
            const int role = static_cast<int>(i % 3) - 1;
            // Stratified contest jitter: distinct by construction, evenly spread.
            const double strat =
                2.0 * (static_cast<double>(i) + 0.2 + 0.6 * rng.next_u01()) /
                    static_cast<double>(members) -
                1.0;
            pos[4 + i] = first_base + static_cast<double>(block) +
                         c * (kRole * role + kJitter * strat);
        }
        const double last_base = first_base + static_cast<double>(blocks - 1);
        const double margin = 0.25;
        const double span = last_base + 2.0 * margin;
        for (double& p : pos) p = (p + margin) / span - 0.5;
    }

    std::vector<double> data(s.n * s.m, 0.0);
    for (std::size_t i = 0; i < s.n; ++i) data[i * s.m] = pos[i];
    return Dataset::from_normalized(std::move(data), s.n, s.m);
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n < 2) throw ConfigError("synthetic spec: n must be >= 2");
    if (spec.m < 1) throw ConfigError("synthetic spec: m must be >= 1");
    if (!(spec.gap_scale > 0.0)) throw ConfigError("synthetic spec: gap-scale must be positive");
    switch (spec.family) {
        case SyntheticFamily::kUniformCube: return gen_uniform_cube(spec);
        case SyntheticFamily::kGaussianClusters: return gen_gaussian_clusters(spec);
        case SyntheticFamily::kBinaryHypercube: return gen_binary_hypercube(spec);
        case SyntheticFamily::kLineWithGaps: return gen_line_with_gaps(spec);
    }
    throw ConfigError("unknown synthetic family");
}

}  // namespace knnmode
