#include "flpo/policy_bridge.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "flpo/hash.hpp"
#include "flpo/stagewise_dp.hpp"

namespace flpo {

using nlohmann::json;

std::uint64_t instance_hash(const Instance& inst) { return fnv1a64(serialize_instance(inst)); }

std::uint64_t facilities_hash(const FacilityConfig& y) { return fnv1a64(serialize_facilities(y)); }

namespace {

std::string read_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot read '{}'", file.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write '{}'", file.string()));
    out << text;
    if (!out) throw Error(fmt::format("write to '{}' failed", file.string()));
}

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(fmt::format("malformed JSON at byte {}: {}", e.byte, e.what()), "");
    }
}

const json& require(const json& obj, const char* key, const std::string& where = "") {
    if (!obj.is_object()) throw ParseError(fmt::format("'{}' must be an object", where), where);
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(fmt::format("missing field '{}{}'", where, key), where + key);
    return *it;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!ok.count(it.key()))
            throw ParseError(fmt::format("unknown field '{}{}'", where, it.key()), where + it.key());
}

std::string header_text(const Instance& inst, const FacilityConfig& y, const char* mode) {
    return fmt::format(
        "  \"version\": 1,\n  \"instance_hash\": \"{}\",\n  \"Y_hash\": \"{}\",\n  \"N\": {},\n  \"M\": {},\n"
        "  \"mode\": \"{}\",\n",
        hash_to_hex(instance_hash(inst)), hash_to_hex(facilities_hash(y)), inst.agent_count(), inst.facility_count(),
        mode);
}

}  // namespace

std::string serialize_request(const Instance& inst, const FacilityConfig& y) {
    inst.check_config(y);
    std::string out = "{\n";
    out += "  \"version\": 1,\n";
    out += "  \"kind\": \"policy-request\",\n";
    out += fmt::format("  \"instance_hash\": \"{}\",\n", hash_to_hex(instance_hash(inst)));
    out += fmt::format("  \"Y_hash\": \"{}\",\n", hash_to_hex(facilities_hash(y)));
    out += "  \"facilities\": " + serialize_facilities(y) + ",\n";
    out += "  \"instance\": " + serialize_instance(inst);
    out += "}\n";
    return out;
}

static PolicyRequest parse_request_impl(const std::string& text) {
    const json doc = parse_json(text);
    if (!doc.is_object()) throw ParseError("request must be an object", "");
    reject_unknown(doc, {"version", "kind", "instance_hash", "Y_hash", "facilities", "instance"}, "");
    if (require(doc, "version") != 1) throw ParseError("unsupported request version", "version");
    if (require(doc, "kind") != "policy-request") throw ParseError("not a policy request", "kind");
    Instance inst = parse_instance(require(doc, "instance").dump());
    FacilityConfig y = parse_facilities(require(doc, "facilities").dump());
    inst.check_config(y);
    PolicyRequest req{std::move(inst), std::move(y), hash_from_hex(require(doc, "instance_hash").get<std::string>()),
                      hash_from_hex(require(doc, "Y_hash").get<std::string>())};
    // Hashes cover the canonical re-serialization, which reproduces the exported bytes exactly.
    if (req.instance_hash != instance_hash(req.instance))
        throw ValidationError("request instance_hash does not match its instance");
    if (req.facilities_hash != facilities_hash(req.facilities))
        throw ValidationError("request Y_hash does not match its facilities");
    return req;
}

PolicyRequest parse_request(const std::string& text) {
    try {
        return parse_request_impl(text);
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("malformed policy request: {}", e.what()), "");
    }
}

void export_request(const Instance& inst, const FacilityConfig& y, const std::filesystem::path& file) {
    write_file(file, serialize_request(inst, y));
}

PolicyRequest load_request(const std::filesystem::path& file) { return parse_request(read_file(file)); }

std::string serialize_policy_matrices(const Instance& inst, const FacilityConfig& y,
                                      const std::vector<PolicyMatrix>& matrices) {
    if (matrices.size() != inst.agent_count()) throw ContractError("one policy matrix per agent required");
    std::string out = "{\n" + header_text(inst, y, "matrix");
    out += "  \"agents\": [\n";
    for (std::size_t i = 0; i < matrices.size(); ++i) {
        const PolicyMatrix& p = matrices[i];
        if (p.facility_count() != inst.facility_count()) throw ContractError("policy matrix size mismatch");
        out += "    {\"matrix\": [\n";
        for (NodeId r = 0; r < p.nodes(); ++r) {
            out += "      [";
            for (NodeId c = 0; c < p.nodes(); ++c) out += (c ? ", " : "") + format_double(p(r, c));
            out += r + 1 < p.nodes() ? "],\n" : "]\n";
        }
        out += i + 1 < matrices.size() ? "    ]},\n" : "    ]}\n";
    }
    out += "  ]\n}\n";
    return out;
}

std::string serialize_policy_paths(const Instance& inst, const FacilityConfig& y,
                                   const std::vector<std::vector<ScoredPath>>& paths) {
    if (paths.size() != inst.agent_count()) throw ContractError("one path list per agent required");
    std::string out = "{\n" + header_text(inst, y, "paths");
    out += "  \"agents\": [\n";
    for (std::size_t i = 0; i < paths.size(); ++i) {
        out += "    {\"paths\": [";
        for (std::size_t k = 0; k < paths[i].size(); ++k) {
            out += k ? ", {\"nodes\": [" : "{\"nodes\": [";
            const auto& nodes = paths[i][k].path.nodes;
            for (std::size_t q = 0; q < nodes.size(); ++q) out += fmt::format("{}{}", q ? ", " : "", nodes[q]);
            const double lp = paths[i][k].log_prob;
            // JSON has no infinities; an impossible path is written with a null log-probability.
            out += "], \"log_prob\": " + (std::isfinite(lp) ? format_double(lp) : std::string("null")) + "}";
        }
        out += i + 1 < paths.size() ? "]},\n" : "]}\n";
    }
    out += "  ]\n}\n";
    return out;
}

void export_exact_policy(const Instance& inst, const FacilityConfig& y, double beta,
                         const std::filesystem::path& file) {
    std::vector<PolicyMatrix> mats;
    for (std::size_t i = 0; i < inst.agent_count(); ++i) mats.push_back(exact_policy_matrix(inst, y, beta, i));
    write_file(file, serialize_policy_matrices(inst, y, mats));
}

static ExternalPolicy parse_policy_impl(const std::string& text, const Instance& inst, const FacilityConfig& y,
                                        PolicyFileHeader* header_out) {
    inst.check_config(y);
    const json doc = parse_json(text);
    if (!doc.is_object()) throw ParseError("policy file must be an object", "");
    reject_unknown(doc, {"version", "instance_hash", "Y_hash", "N", "M", "mode", "agents"}, "");
    PolicyFileHeader h;
    if (require(doc, "version") != 1) throw ParseError("unsupported policy file version", "version");
    h.instance_hash = hash_from_hex(require(doc, "instance_hash").get<std::string>());
    h.facilities_hash = hash_from_hex(require(doc, "Y_hash").get<std::string>());
    h.agents = require(doc, "N").get<std::size_t>();
    h.facility_count = require(doc, "M").get<std::size_t>();
    const std::string mode = require(doc, "mode").get<std::string>();
    if (mode == "matrix") h.mode = ExternalPolicy::Mode::Matrix;
    else if (mode == "paths") h.mode = ExternalPolicy::Mode::Paths;
    else throw ParseError(fmt::format("unknown mode '{}'", mode), "mode");
    if (header_out) *header_out = h;

    if (h.instance_hash != instance_hash(inst))
        throw StalePolicyError(fmt::format("policy instance_hash {} does not match instance {}",
                                           hash_to_hex(h.instance_hash), hash_to_hex(instance_hash(inst))));
    if (h.facilities_hash != facilities_hash(y))
        throw StalePolicyError(fmt::format("policy Y_hash {} does not match facilities {}",
                                           hash_to_hex(h.facilities_hash), hash_to_hex(facilities_hash(y))));
    if (h.agents != inst.agent_count() || h.facility_count != inst.facility_count())
        throw ValidationError(fmt::format("policy declares N={}, M={}; instance has N={}, M={}", h.agents,
                                          h.facility_count, inst.agent_count(), inst.facility_count()));

    const json& agents = require(doc, "agents");
    if (!agents.is_array() || agents.size() != h.agents)
        throw ValidationError(fmt::format("policy lists {} agents, header says {}", agents.size(), h.agents));

    const std::size_t n = inst.facility_count() + 2;
    ExternalPolicy out;
    out.mode = h.mode;
    for (std::size_t i = 0; i < h.agents; ++i) {
        const std::string where = fmt::format("agents[{}].", i);
        const json& ja = agents[i];
        if (h.mode == ExternalPolicy::Mode::Matrix) {
            reject_unknown(ja, {"matrix"}, where);
            const json& jm = require(ja, "matrix", where);
            if (!jm.is_array() || jm.size() != n)
                throw ValidationError(fmt::format("agent {}: matrix must have {} rows", i, n));
            Matrix rows(n, n);
            for (NodeId r = 0; r < n; ++r) {
                if (!jm[r].is_array() || jm[r].size() != n)
                    throw ValidationError(fmt::format("agent {} row {}: expected {} entries", i, r, n));
                for (NodeId c = 0; c < n; ++c) {
                    if (!jm[r][c].is_number())
                        throw ValidationError(fmt::format("agent {} row {}: entry {} is not a number", i, r, c));
                    rows(r, c) = jm[r][c].get<double>();
                }
            }
            PolicyMatrix pm(std::move(rows));
            try {
                pm.validate(1e-6);
            } catch (const PolicyError& e) {
                throw ValidationError(fmt::format("agent {}: {}", i, e.what()));
            }
            for (NodeId c = 0; c < n; ++c)
                if (c != n - 1 && pm(n - 1, c) != 0.0)
                    throw ValidationError(fmt::format("agent {} row {}: destination row must be one-hot", i, n - 1));
            out.matrices.push_back(std::move(pm));
        } else {
            reject_unknown(ja, {"paths"}, where);
            const json& jp = require(ja, "paths", where);
            if (!jp.is_array()) throw ValidationError(fmt::format("agent {}: paths must be an array", i));
            std::vector<ScoredPath> list;
            for (std::size_t k = 0; k < jp.size(); ++k) {
                const std::string pw = fmt::format("{}paths[{}].", where, k);
                reject_unknown(jp[k], {"nodes", "log_prob"}, pw);
                ScoredPath sp;
                sp.path.agent = i;
                sp.path.nodes = require(jp[k], "nodes", pw).get<std::vector<NodeId>>();
                const json& jl = require(jp[k], "log_prob", pw);
                sp.log_prob = jl.is_null() ? -std::numeric_limits<double>::infinity() : jl.get<double>();
                try {
                    validate_path(sp.path, inst.facility_count());
                } catch (const PathError& e) {
                    throw ValidationError(fmt::format("agent {} path {}: {}", i, k, e.what()));
                }
                list.push_back(std::move(sp));
            }
            out.paths.push_back(std::move(list));
        }
    }
    return out;
}

ExternalPolicy parse_policy(const std::string& text, const Instance& inst, const FacilityConfig& y,
                            PolicyFileHeader* header_out) {
    try {
        return parse_policy_impl(text, inst, y, header_out);
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("malformed policy file: {}", e.what()), "");
    }
}

ExternalPolicy import_policy(const std::filesystem::path& file, const Instance& inst, const FacilityConfig& y,
                             PolicyFileHeader* header) {
    return parse_policy(read_file(file), inst, y, header);
}

}  // namespace flpo
