#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "flpo/matrix.hpp"

namespace flpo {

using Point = std::vector<double>;

// Node indices inside one agent's stage graph: 0 is the agent's start,
// 1..M are facilities and M+1 is the (absorbing) destination.
using NodeId = std::size_t;

inline constexpr NodeId kStartNode = 0;

struct Bounds {
    Point lo;
    Point hi;

    double width(std::size_t axis) const { return hi[axis] - lo[axis]; }
    // Largest side of the box; used to scale metaheuristic proposals.
    double max_width() const;
    bool contains(std::span<const double> p) const;

    friend bool operator==(const Bounds&, const Bounds&) = default;
};

// Facility coordinates, one row per facility (M x d).
class FacilityConfig {
public:
    FacilityConfig() = default;
    FacilityConfig(std::size_t facilities, std::size_t dim) : locations_(facilities, dim) {}
    explicit FacilityConfig(Matrix locations);

    std::size_t facility_count() const noexcept { return locations_.rows(); }
    std::size_t dim() const noexcept { return locations_.cols(); }

    std::span<const double> location(std::size_t j) const noexcept { return locations_.row(j); }
    std::span<double> location(std::size_t j) noexcept { return locations_.row(j); }

    const Matrix& matrix() const noexcept { return locations_; }
    Matrix& matrix() noexcept { return locations_; }

    friend bool operator==(const FacilityConfig&, const FacilityConfig&) = default;

private:
    Matrix locations_;
};

class Instance {
public:
    Instance(Matrix starts, Matrix destinations, std::vector<double> weights,
             std::size_t facility_count, Bounds bounds);

    std::size_t agent_count() const noexcept { return weights_.size(); }
    std::size_t facility_count() const noexcept { return facility_count_; }
    std::size_t dim() const noexcept { return starts_.cols(); }
    // Index of the destination node, M+1.
    NodeId destination_node() const noexcept { return facility_count_ + 1; }

    std::span<const double> start(std::size_t agent) const noexcept { return starts_.row(agent); }
    std::span<const double> destination(std::size_t agent) const noexcept {
        return destinations_.row(agent);
    }
    double weight(std::size_t agent) const noexcept { return weights_[agent]; }

    const Matrix& starts() const noexcept { return starts_; }
    const Matrix& destinations() const noexcept { return destinations_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const Bounds& bounds() const noexcept { return bounds_; }

    // Coordinates of `node` for `agent`.
    std::span<const double> position(std::size_t agent, const FacilityConfig& y, NodeId node) const;

    void check_config(const FacilityConfig& y) const;

    friend bool operator==(const Instance&, const Instance&) = default;

private:
    Matrix starts_;
    Matrix destinations_;
    std::vector<double> weights_;
    std::size_t facility_count_;
    Bounds bounds_;
};

// Full stagewise trajectory: M+2 node ids, nodes[0] = 0, nodes[M+1] = M+1.
struct Path {
    std::size_t agent = 0;
    std::vector<NodeId> nodes;

    friend bool operator==(const Path&, const Path&) = default;
};

// Facility visiting order with consecutive repeats collapsed; destination implicit.
struct CanonicalPath {
    std::vector<NodeId> facilities;

    friend bool operator==(const CanonicalPath&, const CanonicalPath&) = default;
    friend auto operator<=>(const CanonicalPath&, const CanonicalPath&) = default;
};

// Squared Euclidean distance.
double pair_cost(std::span<const double> a, std::span<const double> b);

void validate_path(const Path& path, std::size_t facility_count);

// Sum of leg costs, accumulated left to right over stages.
double path_cost(const Instance& inst, const FacilityConfig& y, const Path& path);

// Adds d/dY of path_cost to `grad` (M x d), scaled by `scale`.
void accumulate_path_gradient(const Instance& inst, const FacilityConfig& y, const Path& path,
                              double scale, Matrix& grad);

CanonicalPath canonicalize(const Path& path);

// Inverse of canonicalize: facilities in order, padded with destination entries.
Path expand(const CanonicalPath& canonical, std::size_t agent, std::size_t facility_count);

Instance generate_instance(std::size_t n_agents, std::size_t n_facilities, std::size_t dim,
                           const Bounds& bounds, std::uint64_t seed);

Bounds unit_box(std::size_t dim);

// All facilities at the weighted centroid of every start and destination, plus
// a seeded jitter of magnitude `jitter` per coordinate.
FacilityConfig centroid_init(const Instance& inst, std::uint64_t seed, double jitter = 1e-4);

FacilityConfig random_init(const Instance& inst, std::uint64_t seed);

// Canonical text serialization (also the bytes hashed by the policy bridge).
std::string serialize_instance(const Instance& inst);
Instance parse_instance(const std::string& text);

void save_instance(const Instance& inst, const std::filesystem::path& file);
Instance load_instance(const std::filesystem::path& file);

std::string serialize_facilities(const FacilityConfig& y);
FacilityConfig parse_facilities(const std::string& text);

// Decimal text with 17 significant digits; parses back to the same double.
std::string format_double(double v);

}  // namespace flpo
