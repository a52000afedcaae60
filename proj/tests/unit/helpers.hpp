#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "flpo/instance.hpp"
#include "flpo/matrix.hpp"

namespace flpo::test {

inline Instance random_instance(std::size_t n, std::size_t m, std::uint64_t seed, std::size_t dim = 2) {
    return generate_instance(n, m, dim, unit_box(dim), seed);
}

// Instance with unequal agent weights, to keep rho visible in every identity.
inline Instance weighted_instance(std::size_t n, std::size_t m, std::uint64_t seed) {
    Instance base = random_instance(n, m, seed);
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 + static_cast<double>(i + 1) / static_cast<double>(n);
    return Instance(base.starts(), base.destinations(), w, m, base.bounds());
}

inline Instance make_instance(std::vector<Point> starts, std::vector<Point> dests, std::size_t m,
                              std::vector<double> weights = {}) {
    const std::size_t n = starts.size();
    const std::size_t d = starts.front().size();
    Matrix s(n, d), t(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k) {
            s(i, k) = starts[i][k];
            t(i, k) = dests[i][k];
        }
    if (weights.empty()) weights.assign(n, 1.0 / static_cast<double>(n));
    Bounds b{Point(d, -10.0), Point(d, 10.0)};
    return Instance(std::move(s), std::move(t), std::move(weights), m, std::move(b));
}

inline FacilityConfig make_facilities(std::vector<Point> rows) {
    FacilityConfig y(rows.size(), rows.front().size());
    for (std::size_t j = 0; j < rows.size(); ++j)
        for (std::size_t k = 0; k < rows[j].size(); ++k) y.matrix()(j, k) = rows[j][k];
    return y;
}

inline double max_rel_diff(const Matrix& a, const Matrix& b) {
    return (a - b).max_abs() / (1.0 + b.max_abs());
}

inline double cosine(const Matrix& a, const Matrix& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t k = 0; k < a.flat().size(); ++k) {
        dot += a.flat()[k] * b.flat()[k];
        na += a.flat()[k] * a.flat()[k];
        nb += b.flat()[k] * b.flat()[k];
    }
    return dot / std::sqrt(na * nb);
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("flpo-" + tag + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace flpo::test
