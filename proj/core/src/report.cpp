#include "flpo/report.hpp"

#include <fmt/format.h>

namespace flpo {

double recompute_cost(const Instance& inst, const SolveReport& report) {
    double total = 0.0;
    for (std::size_t i = 0; i < inst.agent_count(); ++i)
        total += inst.weight(i) * path_cost(inst, report.facilities, expand(report.paths[i], i, inst.facility_count()));
    return total;
}

namespace {

std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string serialize_report(const SolveReport& r, bool include_timing) {
    std::string out = "{\n";
    out += fmt::format("  \"method\": \"{}\",\n", json_escape(r.method));
    out += fmt::format("  \"seed\": {},\n", r.seed);
    out += "  \"cost\": " + format_double(r.cost) + ",\n";
    out += "  \"facilities\": " + serialize_facilities(r.facilities) + ",\n";
    out += "  \"paths\": [";
    for (std::size_t i = 0; i < r.paths.size(); ++i) {
        out += i ? ", [" : "[";
        for (std::size_t k = 0; k < r.paths[i].facilities.size(); ++k)
            out += fmt::format("{}{}", k ? ", " : "", r.paths[i].facilities[k]);
        out += "]";
    }
    out += "],\n";
    out += "  \"stats\": {";
    for (std::size_t k = 0; k < r.stats.size(); ++k)
        out += fmt::format("{}\"{}\": {}", k ? ", " : "", json_escape(r.stats[k].first), format_double(r.stats[k].second));
    out += "},\n";
    out += "  \"trace\": [";
    for (std::size_t k = 0; k < r.trace.size(); ++k) {
        const TracePoint& t = r.trace[k];
        out += k ? ",\n    " : "\n    ";
        out += fmt::format("{{\"beta\": {}, \"iter\": {}, \"F\": {}, \"grad_norm\": {}", format_double(t.beta), t.iter,
                           format_double(t.free_energy), format_double(t.grad_norm));
        if (include_timing) out += ", \"wall_ms\": " + format_double(t.wall_ms);
        out += "}";
    }
    out += r.trace.empty() ? "],\n" : "\n  ],\n";
    if (include_timing) {
        out += "  \"beta_wall_ms\": [";
        for (std::size_t k = 0; k < r.beta_wall_ms.size(); ++k)
            out += (k ? ", " : "") + format_double(r.beta_wall_ms[k]);
        out += "],\n";
        out += "  \"wall_ms\": " + format_double(r.wall_ms) + ",\n";
    }
    out += "  \"config\": " + (r.config_json.empty() ? std::string("{}") : r.config_json) + "\n";
    out += "}\n";
    return out;
}

std::string trace_csv(const SolveReport& r) {
    std::string out = "beta,iter,F,grad_norm,wall_ms\n";
    for (const TracePoint& t : r.trace)
        out += fmt::format("{},{},{},{},{}\n", format_double(t.beta), t.iter, format_double(t.free_energy),
                           format_double(t.grad_norm), format_double(t.wall_ms));
    return out;
}

}  // namespace flpo
