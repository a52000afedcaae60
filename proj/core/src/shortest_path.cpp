#include "flpo/shortest_path.hpp"

#include <vector>

namespace flpo {

namespace {

// Values W_t(f) = cheapest cost from facility f to the destination with at
// most t further facility moves, for t = 0..T where W_T is a fixed point or
// T = M-1. Row t of the result holds W_t; entries are indexed by facility 0..M-1.
struct MinPlus {
    std::size_t m = 0;
    std::vector<double> fac_fac;   // m x m
    std::vector<double> to_dest;   // m
    std::vector<double> from_start;  // m
    double direct = 0.0;
    std::vector<std::vector<double>> w;

    double value(std::size_t remaining, std::size_t f) const {
        return w[std::min(remaining, w.size() - 1)][f];
    }
};

MinPlus build(const Instance& inst, const FacilityConfig& y, std::size_t agent) {
    inst.check_config(y);
    MinPlus mp;
    const std::size_t m = inst.facility_count();
    mp.m = m;
    mp.fac_fac.resize(m * m);
    mp.to_dest.resize(m);
    mp.from_start.resize(m);
    const auto s = inst.start(agent);
    const auto t = inst.destination(agent);
    for (std::size_t f = 0; f < m; ++f) {
        mp.to_dest[f] = pair_cost(y.location(f), t);
        mp.from_start[f] = pair_cost(s, y.location(f));
        for (std::size_t g = 0; g < m; ++g) mp.fac_fac[f * m + g] = f == g ? 0.0 : pair_cost(y.location(f), y.location(g));
    }
    mp.direct = pair_cost(s, t);

    mp.w.push_back(mp.to_dest);
    for (std::size_t step = 1; step < m; ++step) {
        const std::vector<double>& prev = mp.w.back();
        std::vector<double> next(m);
        bool changed = false;
        for (std::size_t f = 0; f < m; ++f) {
            double best = mp.to_dest[f];
            for (std::size_t g = 0; g < m; ++g) {
                if (g == f) continue;
                best = std::min(best, mp.fac_fac[f * m + g] + prev[g]);
            }
            next[f] = best;
            changed = changed || best != prev[f];
        }
        if (!changed) break;
        mp.w.push_back(std::move(next));
    }
    return mp;
}

}  // namespace

double shortest_path_cost(const Instance& inst, const FacilityConfig& y, std::size_t agent) {
    const MinPlus mp = build(inst, y, agent);
    double best = mp.direct;
    // From stage 1, M-1 further facility moves remain.
    for (std::size_t f = 0; f < mp.m; ++f) best = std::min(best, mp.from_start[f] + mp.value(mp.m - 1, f));
    return best;
}

Path shortest_path(const Instance& inst, const FacilityConfig& y, std::size_t agent) {
    const MinPlus mp = build(inst, y, agent);
    const std::size_t m = mp.m;
    const NodeId dest = m + 1;
    Path path{agent, std::vector<NodeId>(m + 2, dest)};
    path.nodes[0] = kStartNode;

    double best = mp.direct;
    std::size_t choice = m;  // m encodes "destination"
    for (std::size_t f = 0; f < m; ++f) {
        const double c = mp.from_start[f] + mp.value(m - 1, f);
        if (c < best) {
            best = c;
            choice = f;
        }
    }
    std::size_t stage = 1;
    while (choice != m) {
        path.nodes[stage] = choice + 1;
        const std::size_t cur = choice;
        if (stage == m) break;
        const std::size_t remaining = m - stage - 1;
        best = mp.to_dest[cur];
        choice = m;
        for (std::size_t g = 0; g < m; ++g) {
            if (g == cur) continue;
            const double c = mp.fac_fac[cur * m + g] + mp.value(remaining, g);
            if (c < best) {
                best = c;
                choice = g;
            }
        }
        ++stage;
    }
    return path;
}

double fitness(const Instance& inst, const FacilityConfig& y) {
    double total = 0.0;
    for (std::size_t i = 0; i < inst.agent_count(); ++i) total += inst.weight(i) * shortest_path_cost(inst, y, i);
    return total;
}

}  // namespace flpo
