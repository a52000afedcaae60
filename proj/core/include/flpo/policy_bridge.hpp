#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "flpo/instance.hpp"
#include "flpo/mixture_gradient.hpp"

namespace flpo {

// FNV-1a 64 over serialize_instance / serialize_facilities bytes.
std::uint64_t instance_hash(const Instance& inst);
std::uint64_t facilities_hash(const FacilityConfig& y);

struct PolicyRequest {
    Instance instance;
    FacilityConfig facilities;
    std::uint64_t instance_hash = 0;
    std::uint64_t facilities_hash = 0;
};

std::string serialize_request(const Instance& inst, const FacilityConfig& y);
PolicyRequest parse_request(const std::string& text);

void export_request(const Instance& inst, const FacilityConfig& y, const std::filesystem::path& file);
PolicyRequest load_request(const std::filesystem::path& file);

struct PolicyFileHeader {
    int version = 1;
    std::uint64_t instance_hash = 0;
    std::uint64_t facilities_hash = 0;
    std::size_t agents = 0;
    std::size_t facility_count = 0;
    ExternalPolicy::Mode mode = ExternalPolicy::Mode::Matrix;
};

std::string serialize_policy_matrices(const Instance& inst, const FacilityConfig& y,
                                      const std::vector<PolicyMatrix>& matrices);
std::string serialize_policy_paths(const Instance& inst, const FacilityConfig& y,
                                   const std::vector<std::vector<ScoredPath>>& paths);

// Writes the exact stagewise policy (single-matrix export) for every agent.
void export_exact_policy(const Instance& inst, const FacilityConfig& y, double beta,
                         const std::filesystem::path& file);

// Parses and validates a policy file against (inst, y). Hash mismatches throw
// StalePolicyError; malformed rows throw ValidationError naming agent and row.
ExternalPolicy parse_policy(const std::string& text, const Instance& inst, const FacilityConfig& y,
                            PolicyFileHeader* header = nullptr);
ExternalPolicy import_policy(const std::filesystem::path& file, const Instance& inst, const FacilityConfig& y,
                             PolicyFileHeader* header = nullptr);

}  // namespace flpo
