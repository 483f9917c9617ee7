#ifndef QRATE_JSON_IO_HPP
#define QRATE_JSON_IO_HPP

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "qrate/local_model.hpp"
#include "qrate/network.hpp"
#include "qrate/path_rate.hpp"
#include "qrate/rate_solver.hpp"

namespace qrate {

using OrderedJson = nlohmann::ordered_json;

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr const char* kVersion = "0.1.0";

// FNV-1a over raw bytes; used to stamp emitted artifacts.
inline std::string fnv1a_digest(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

// ------------------------------------------------------------------
// Emission. All numbers are written with 17 significant digits so that
// parse -> re-emit is byte-identical for 64-bit floats.
// ------------------------------------------------------------------

namespace jsonio {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

inline void escape_to(const std::string& s, std::string& out) {
    out += '"';
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    out += '"';
}

inline void dump_to(const OrderedJson& j, std::string& out) {
    switch (j.type()) {
        case OrderedJson::value_t::null: out += "null"; break;
        case OrderedJson::value_t::boolean: out += j.get<bool>() ? "true" : "false"; break;
        case OrderedJson::value_t::number_integer:
            out += std::to_string(j.get<long long>());
            break;
        case OrderedJson::value_t::number_unsigned:
            out += std::to_string(j.get<unsigned long long>());
            break;
        case OrderedJson::value_t::number_float: out += format_double(j.get<double>()); break;
        case OrderedJson::value_t::string: escape_to(j.get<std::string>(), out); break;
        case OrderedJson::value_t::array: {
            out += '[';
            bool first = true;
            for (const auto& e : j) {
                if (!first) out += ',';
                first = false;
                dump_to(e, out);
            }
            out += ']';
            break;
        }
        case OrderedJson::value_t::object: {
            out += '{';
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ',';
                first = false;
                escape_to(it.key(), out);
                out += ':';
                dump_to(it.value(), out);
            }
            out += '}';
            break;
        }
        default: out += "null";
    }
}

}  // namespace jsonio

inline std::string dump_json(const OrderedJson& j) {
    std::string out;
    jsonio::dump_to(j, out);
    return out;
}

inline OrderedJson parse_json(const std::string& text, const std::string& what) {
    try {
        return OrderedJson::parse(text);
    } catch (const std::exception& e) {
        throw ParseError(what + ": " + e.what());
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path);
    out << content;
}

// ------------------------------------------------------------------
// Network spec files
// ------------------------------------------------------------------

inline NetworkSpec spec_from_json(const OrderedJson& j) {
    if (!j.is_object() || !j.contains("type")) throw ParseError("spec: missing type");
    std::string type = j.at("type").get<std::string>();
    auto get_vec = [&](const char* key) {
        if (!j.contains(key) || !j.at(key).is_array()) throw ParseError(std::string("spec: missing ") + key);
        Vec v;
        for (const auto& e : j.at(key)) v.push_back(e.get<double>());
        return v;
    };
    if (type == "jackson") {
        JacksonSpec js;
        js.a = get_vec("a");
        js.sigma = get_vec("sigma");
        js.N = static_cast<int>(js.a.size());
        if (!j.contains("routing") || !j.at("routing").is_array()) throw ParseError("spec: missing routing");
        const auto& rows = j.at("routing");
        if (static_cast<int>(rows.size()) != js.N) throw ParseError("spec: routing row count != N");
        js.routing = Mat(js.N, js.N + 1);
        for (int i = 0; i < js.N; ++i) {
            if (static_cast<int>(rows[i].size()) != js.N + 1)
                throw ParseError("spec: routing rows need N+1 entries (exit first)");
            for (int c = 0; c <= js.N; ++c) js.routing(i, c) = rows[i][c].get<double>();
        }
        return NetworkSpec{js};
    }
    if (type == "processor_sharing") {
        ProcessorSharingSpec ps;
        ps.a = get_vec("a");
        ps.sigma = get_vec("sigma");
        ps.f = get_vec("f");
        ps.N = static_cast<int>(ps.a.size());
        return NetworkSpec{ps};
    }
    throw ParseError("spec: unknown type '" + type + "'");
}

inline NetworkSpec load_spec(const std::string& path) {
    return spec_from_json(parse_json(read_file(path), path));
}

inline OrderedJson spec_to_json(const NetworkSpec& spec) {
    OrderedJson j;
    if (spec.is_jackson()) {
        const auto& js = spec.jackson();
        j["type"] = "jackson";
        j["a"] = js.a;
        j["sigma"] = js.sigma;
        OrderedJson rows = OrderedJson::array();
        for (int i = 0; i < js.N; ++i) {
            OrderedJson row = OrderedJson::array();
            for (int c = 0; c <= js.N; ++c) row.push_back(js.routing(i, c));
            rows.push_back(row);
        }
        j["routing"] = rows;
    } else {
        const auto& ps = spec.ps();
        j["type"] = "processor_sharing";
        j["a"] = ps.a;
        j["sigma"] = ps.sigma;
        j["f"] = ps.f;
    }
    return j;
}

// Tilt files map canonical direction names to multipliers,
// e.g. {"+1": 0.5, "-1": 2.0, "1>2": 1.0}. Missing directions default to 1.
inline TiltVector tilt_from_json(const OrderedJson& j, const NetworkSpec& spec) {
    auto dirs = jump_directions(spec);
    TiltVector t = TiltVector::ones(dirs.size());
    if (!j.is_object()) throw ParseError("tilt: expected an object of direction -> multiplier");
    for (auto it = j.begin(); it != j.end(); ++it) {
        auto d = JumpDirection::parse(it.key(), spec.size());
        if (!d) throw ParseError("tilt: bad direction name '" + it.key() + "'");
        bool found = false;
        for (std::size_t k = 0; k < dirs.size(); ++k)
            if (dirs[k] == *d) {
                t[k] = it.value().get<double>();
                found = true;
            }
        if (!found) throw ParseError("tilt: direction '" + it.key() + "' not in the model");
    }
    return t;
}

inline OrderedJson tilt_to_json(const TiltVector& t, const std::vector<JumpDirection>& dirs) {
    OrderedJson j;
    for (std::size_t k = 0; k < dirs.size(); ++k) j[dirs[k].name()] = t[k];
    return j;
}

// Path files: [[t, [x...]], ...]
inline PiecewisePath path_from_json(const OrderedJson& j, bool require_orthant = true) {
    if (!j.is_array()) throw ParseError("path: expected [[t,[x...]],...]");
    PiecewisePath p;
    for (const auto& e : j) {
        if (!e.is_array() || e.size() != 2) throw ParseError("path: each entry is [t,[x...]]");
        p.times.push_back(e[0].get<double>());
        Vec x;
        for (const auto& xi : e[1]) x.push_back(xi.get<double>());
        p.values.push_back(x);
    }
    p.check(require_orthant);
    return p;
}

inline OrderedJson rate_solution_to_json(const RateSolution& sol,
                                         const std::vector<JumpDirection>& dirs) {
    OrderedJson j;
    if (std::isfinite(sol.value)) j["value"] = sol.value;
    else j["value"] = "inf";
    j["c"] = tilt_to_json(sol.c, dirs);
    j["tau"] = sol.occupancy.tau;
    j["rho"] = sol.occupancy.rho;
    OrderedJson rbar;
    for (std::size_t k = 0; k < dirs.size(); ++k)
        if (k < sol.rbar.size()) rbar[dirs[k].name()] = sol.rbar[k];
    j["rbar"] = rbar;
    j["lambda"] = sol.lambda;
    j["status"] = to_string(sol.status);
    OrderedJson kset = OrderedJson::array();
    for (int i : mask_to_indices(sol.occupancy.K)) kset.push_back(i + 1);
    j["K"] = kset;
    j["beta"] = sol.beta;
    return j;
}

}  // namespace qrate

#endif
