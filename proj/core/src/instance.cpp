#include "flpo/instance.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "flpo/rng.hpp"

namespace flpo {

using nlohmann::json;

double Bounds::max_width() const {
    double w = 0.0;
    for (std::size_t a = 0; a < lo.size(); ++a) w = std::max(w, hi[a] - lo[a]);
    return w;
}

bool Bounds::contains(std::span<const double> p) const {
    if (p.size() != lo.size()) return false;
    for (std::size_t a = 0; a < p.size(); ++a)
        if (p[a] < lo[a] || p[a] > hi[a]) return false;
    return true;
}

FacilityConfig::FacilityConfig(Matrix locations) : locations_(std::move(locations)) {
    if (!locations_.all_finite()) throw ContractError("facility coordinates must be finite");
}

Instance::Instance(Matrix starts, Matrix destinations, std::vector<double> weights,
                   std::size_t facility_count, Bounds bounds)
    : starts_(std::move(starts)),
      destinations_(std::move(destinations)),
      weights_(std::move(weights)),
      facility_count_(facility_count),
      bounds_(std::move(bounds)) {
    const std::size_t n = weights_.size();
    if (n == 0) throw ValidationError("instance needs at least one agent");
    if (facility_count_ == 0) throw ValidationError("instance needs at least one facility");
    if (starts_.rows() != n || destinations_.rows() != n)
        throw ValidationError(fmt::format("agent count mismatch: {} starts, {} destinations, {} weights",
                                          starts_.rows(), destinations_.rows(), n));
    if (starts_.cols() == 0 || starts_.cols() != destinations_.cols())
        throw ValidationError("starts and destinations must share a nonzero dimension");
    if (bounds_.lo.size() != dim() || bounds_.hi.size() != dim())
        throw ValidationError("bounds dimension does not match instance dimension");
    for (std::size_t a = 0; a < dim(); ++a)
        if (!(bounds_.lo[a] <= bounds_.hi[a])) throw ValidationError("bounds lo must not exceed hi");
    if (!starts_.all_finite() || !destinations_.all_finite())
        throw ValidationError("agent coordinates must be finite");
    double total = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("weights must be finite and nonnegative");
        total += w;
    }
    if (!(total > 0.0)) throw ValidationError("weights must not all be zero");
    for (std::size_t i = 0; i < n; ++i) {
        if (!bounds_.contains(starts_.row(i)) || !bounds_.contains(destinations_.row(i)))
            throw ValidationError(fmt::format("agent {} lies outside the domain bounds", i));
    }
}

std::span<const double> Instance::position(std::size_t agent, const FacilityConfig& y,
                                           NodeId node) const {
    if (node == kStartNode) return start(agent);
    if (node == destination_node()) return destination(agent);
    return y.location(node - 1);
}

void Instance::check_config(const FacilityConfig& y) const {
    if (y.facility_count() != facility_count_ || y.dim() != dim())
        throw ContractError(fmt::format("facility config is {}x{}, instance expects {}x{}",
                                        y.facility_count(), y.dim(), facility_count_, dim()));
}

double pair_cost(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw ContractError(fmt::format("dimension mismatch: {} vs {}", a.size(), b.size()));
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double diff = a[k] - b[k];
        s += diff * diff;
    }
    return s;
}

void validate_path(const Path& path, std::size_t facility_count) {
    const std::size_t dest = facility_count + 1;
    if (path.nodes.size() != facility_count + 2)
        throw PathError(fmt::format("path has {} nodes, expected {}", path.nodes.size(), facility_count + 2));
    if (path.nodes.front() != kStartNode) throw PathError("path must begin at the start node");
    if (path.nodes.back() != dest) throw PathError("path must end at the destination node");
    bool absorbed = false;
    for (std::size_t k = 1; k <= facility_count; ++k) {
        const NodeId n = path.nodes[k];
        if (n < 1 || n > dest) throw PathError(fmt::format("invalid node {} at stage {}", n, k));
        if (absorbed && n != dest)
            throw PathError(fmt::format("node {} at stage {} follows the destination", n, k));
        absorbed = absorbed || n == dest;
    }
}

double path_cost(const Instance& inst, const FacilityConfig& y, const Path& path) {
    validate_path(path, inst.facility_count());
    const std::size_t dest = inst.destination_node();
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < path.nodes.size(); ++k) {
        const NodeId a = path.nodes[k];
        const NodeId b = path.nodes[k + 1];
        if (a == dest) break;
        total += pair_cost(inst.position(path.agent, y, a), inst.position(path.agent, y, b));
    }
    return total;
}

void accumulate_path_gradient(const Instance& inst, const FacilityConfig& y, const Path& path,
                              double scale, Matrix& grad) {
    const std::size_t dest = inst.destination_node();
    const std::size_t d = inst.dim();
    for (std::size_t k = 0; k + 1 < path.nodes.size(); ++k) {
        const NodeId a = path.nodes[k];
        const NodeId b = path.nodes[k + 1];
        if (a == dest) break;
        if (a == b) continue;
        const auto pa = inst.position(path.agent, y, a);
        const auto pb = inst.position(path.agent, y, b);
        const bool a_fac = a != kStartNode;
        const bool b_fac = b != dest;
        for (std::size_t c = 0; c < d; ++c) {
            const double g = 2.0 * scale * (pa[c] - pb[c]);
            if (a_fac) grad(a - 1, c) += g;
            if (b_fac) grad(b - 1, c) -= g;
        }
    }
}

CanonicalPath canonicalize(const Path& path) {
    CanonicalPath out;
    const std::size_t dest = path.nodes.empty() ? 0 : path.nodes.back();
    for (std::size_t k = 1; k + 1 < path.nodes.size(); ++k) {
        const NodeId n = path.nodes[k];
        if (n == dest) break;
        if (out.facilities.empty() || out.facilities.back() != n) out.facilities.push_back(n);
    }
    return out;
}

Path expand(const CanonicalPath& canonical, std::size_t agent, std::size_t facility_count) {
    if (canonical.facilities.size() > facility_count)
        throw PathError("canonical path longer than the stage horizon");
    Path p{agent, std::vector<NodeId>(facility_count + 2, facility_count + 1)};
    p.nodes[0] = kStartNode;
    std::copy(canonical.facilities.begin(), canonical.facilities.end(), p.nodes.begin() + 1);
    return p;
}

Bounds unit_box(std::size_t dim) { return Bounds{Point(dim, 0.0), Point(dim, 1.0)}; }

Instance generate_instance(std::size_t n_agents, std::size_t n_facilities, std::size_t dim,
                           const Bounds& bounds, std::uint64_t seed) {
    if (n_agents < 1) throw ArgumentError("n_agents must be at least 1");
    if (n_facilities < 1) throw ArgumentError("n_facilities must be at least 1");
    if (dim < 1 || bounds.lo.size() != dim || bounds.hi.size() != dim)
        throw ArgumentError("bounds must match the requested dimension");
    Rng rng(substream_seed({seed, 0x1257ULL}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw = [&](Matrix& m) {
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t a = 0; a < dim; ++a)
                m(i, a) = bounds.lo[a] + unit(rng) * (bounds.hi[a] - bounds.lo[a]);
    };
    Matrix starts(n_agents, dim);
    Matrix dests(n_agents, dim);
    draw(starts);
    draw(dests);
    std::vector<double> weights(n_agents, 1.0 / static_cast<double>(n_agents));
    return Instance(std::move(starts), std::move(dests), std::move(weights), n_facilities, bounds);
}

FacilityConfig centroid_init(const Instance& inst, std::uint64_t seed, double jitter) {
    const std::size_t d = inst.dim();
    Point centroid(d, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < inst.agent_count(); ++i) {
        const double w = inst.weight(i);
        for (std::size_t a = 0; a < d; ++a)
            centroid[a] += w * (inst.start(i)[a] + inst.destination(i)[a]);
        total += 2.0 * w;
    }
    for (double& c : centroid) c /= total;
    Rng rng(substream_seed({seed, 0xce17ULL}));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    FacilityConfig y(inst.facility_count(), d);
    for (std::size_t j = 0; j < inst.facility_count(); ++j)
        for (std::size_t a = 0; a < d; ++a) y.location(j)[a] = centroid[a] + jitter * u(rng);
    return y;
}

FacilityConfig random_init(const Instance& inst, std::uint64_t seed) {
    const Bounds& b = inst.bounds();
    Rng rng(substream_seed({seed, 0x4a4dULL}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    FacilityConfig y(inst.facility_count(), inst.dim());
    for (std::size_t j = 0; j < inst.facility_count(); ++j)
        for (std::size_t a = 0; a < inst.dim(); ++a)
            y.location(j)[a] = b.lo[a] + unit(rng) * (b.hi[a] - b.lo[a]);
    return y;
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

namespace {

void append_vector(std::string& out, std::span<const double> v) {
    out += '[';
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) out += ", ";
        out += format_double(v[k]);
    }
    out += ']';
}

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + offset, '\n'));
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!ok.count(it.key()))
            throw ParseError(fmt::format("unknown field '{}{}'", where, it.key()), where + it.key());
}

const json& require(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object()) throw ParseError(fmt::format("'{}' must be an object", where), where);
    auto it = obj.find(key);
    if (it == obj.end())
        throw ParseError(fmt::format("missing field '{}{}'", where, key), where + key);
    return *it;
}

double number(const json& v, const std::string& field) {
    if (!v.is_number()) throw ParseError(fmt::format("field '{}' must be a number", field), field);
    return v.get<double>();
}

Point vector_of(const json& v, const std::string& field, std::size_t dim) {
    if (!v.is_array()) throw ParseError(fmt::format("field '{}' must be an array", field), field);
    if (v.size() != dim)
        throw ParseError(fmt::format("field '{}' has {} entries, expected {}", field, v.size(), dim), field);
    Point p;
    for (std::size_t k = 0; k < v.size(); ++k) p.push_back(number(v[k], fmt::format("{}[{}]", field, k)));
    return p;
}

std::size_t count_of(const json& v, const std::string& field) {
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ParseError(fmt::format("field '{}' must be a nonnegative integer", field), field);
    return v.get<std::size_t>();
}

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(fmt::format("line {}: {}", line_of_offset(text, e.byte), e.what()), "",
                         line_of_offset(text, e.byte));
    }
}

}  // namespace

std::string serialize_instance(const Instance& inst) {
    const std::size_t n = inst.agent_count();
    auto rows = [&](const Matrix& m) {
        std::string out = "[\n";
        for (std::size_t i = 0; i < n; ++i) {
            out += "    ";
            append_vector(out, m.row(i));
            out += i + 1 < n ? ",\n" : "\n";
        }
        return out + "  ]";
    };
    std::string out = "{\n";
    out += "  \"version\": 1,\n";
    out += fmt::format("  \"dim\": {},\n", inst.dim());
    out += "  \"bounds\": {\"lo\": ";
    append_vector(out, inst.bounds().lo);
    out += ", \"hi\": ";
    append_vector(out, inst.bounds().hi);
    out += "},\n";
    out += fmt::format("  \"facility_count\": {},\n", inst.facility_count());
    out += "  \"starts\": " + rows(inst.starts()) + ",\n";
    out += "  \"destinations\": " + rows(inst.destinations()) + ",\n";
    out += "  \"weights\": ";
    append_vector(out, inst.weights());
    out += "\n}\n";
    return out;
}

Instance parse_instance(const std::string& text) {
    const json doc = parse_json(text);
    if (!doc.is_object()) throw ParseError("instance document must be an object", "");
    reject_unknown(doc, {"version", "dim", "bounds", "facility_count", "starts", "destinations", "weights"}, "");
    const std::size_t version = count_of(require(doc, "version", ""), "version");
    if (version != 1) throw ParseError(fmt::format("unsupported instance version {}", version), "version");
    const std::size_t dim = count_of(require(doc, "dim", ""), "dim");
    if (dim == 0) throw ParseError("field 'dim' must be positive", "dim");

    const json& jb = require(doc, "bounds", "");
    reject_unknown(jb, {"lo", "hi"}, "bounds.");
    Bounds bounds{vector_of(require(jb, "lo", "bounds."), "bounds.lo", dim),
                  vector_of(require(jb, "hi", "bounds."), "bounds.hi", dim)};

    const std::size_t m = count_of(require(doc, "facility_count", ""), "facility_count");

    auto points = [&](const char* key) {
        const json& arr = require(doc, key, "");
        if (!arr.is_array()) throw ParseError(fmt::format("field '{}' must be an array", key), key);
        Matrix out(arr.size(), dim);
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const Point p = vector_of(arr[i], fmt::format("{}[{}]", key, i), dim);
            std::copy(p.begin(), p.end(), out.row(i).begin());
        }
        return out;
    };
    Matrix starts = points("starts");
    Matrix dests = points("destinations");
    const json& jw = require(doc, "weights", "");
    if (!jw.is_array()) throw ParseError("field 'weights' must be an array", "weights");
    std::vector<double> weights;
    for (std::size_t i = 0; i < jw.size(); ++i) weights.push_back(number(jw[i], fmt::format("weights[{}]", i)));
    return Instance(std::move(starts), std::move(dests), std::move(weights), m, std::move(bounds));
}

void save_instance(const Instance& inst, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write '{}'", file.string()));
    out << serialize_instance(inst);
    if (!out) throw Error(fmt::format("write to '{}' failed", file.string()));
}

Instance load_instance(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot read '{}'", file.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_instance(ss.str());
}

std::string serialize_facilities(const FacilityConfig& y) {
    std::string out = "[";
    for (std::size_t j = 0; j < y.facility_count(); ++j) {
        if (j) out += ", ";
        append_vector(out, y.location(j));
    }
    out += ']';
    return out;
}

FacilityConfig parse_facilities(const std::string& text) {
    const json doc = parse_json(text);
    if (!doc.is_array() || doc.empty())
        throw ParseError("facilities must be a nonempty array of coordinate rows", "facilities");
    const std::size_t dim = doc[0].is_array() ? doc[0].size() : 0;
    Matrix m(doc.size(), dim);
    for (std::size_t j = 0; j < doc.size(); ++j) {
        const Point p = vector_of(doc[j], fmt::format("facilities[{}]", j), dim);
        std::copy(p.begin(), p.end(), m.row(j).begin());
    }
    return FacilityConfig(std::move(m));
}

}  // namespace flpo
