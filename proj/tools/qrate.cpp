// qrate: rate functions, reflection maps, and tilted simulation for
// Jackson and processor-sharing networks.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qrate/json_io.hpp"
#include "qrate/oracle.hpp"
#include "qrate/simulate.hpp"
#include "qrate/skorokhod.hpp"

namespace fs = std::filesystem;
using namespace qrate;

namespace {

struct GlobalOpts {
    std::uint64_t seed = 12345;
    int threads = 1;
    std::string out_dir;
    std::string format = "json";
};

struct RunContext {
    std::string command;
    GlobalOpts opts;
    std::vector<std::pair<std::string, std::string>> inputs;   // path, digest
    std::vector<std::string> outputs;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    std::string read_input(const std::string& path) {
        std::string content = read_file(path);
        inputs.emplace_back(path, fnv1a_digest(content));
        return content;
    }

    // digest over the deterministic run identity (inputs, flags, seed);
    // wall-clock is recorded in the manifest but not digested
    std::string manifest_digest() const {
        std::string key = command + "|" + kVersion + "|" + std::to_string(opts.seed);
        for (const auto& [p, d] : inputs) key += "|" + p + ":" + d;
        return fnv1a_digest(key);
    }

    void emit(const std::string& name, const std::string& content) {
        if (opts.out_dir.empty()) return;
        fs::create_directories(opts.out_dir);
        std::string path = (fs::path(opts.out_dir) / name).string();
        // CSV artifacts reference the run manifest in a comment line
        bool csv = name.size() > 4 && name.substr(name.size() - 4) == ".csv";
        write_file(path, csv ? "# manifest " + manifest_digest() + "\n" + content : content);
        outputs.push_back(path);
    }

    void finish() {
        if (opts.out_dir.empty()) return;
        OrderedJson m;
        m["command"] = command;
        m["version"] = kVersion;
        m["seed"] = opts.seed;
        OrderedJson ins = OrderedJson::array();
        for (const auto& [p, d] : inputs) {
            OrderedJson e;
            e["path"] = p;
            e["digest"] = d;
            ins.push_back(e);
        }
        m["inputs"] = ins;
        m["outputs"] = outputs;
        m["digest"] = manifest_digest();
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        m["wallclock_s"] = secs;
        fs::create_directories(opts.out_dir);
        write_file((fs::path(opts.out_dir) / "manifest.json").string(), dump_json(m) + "\n");
    }
};

Vec parse_doubles(const std::string& s) {
    Vec out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
    }
    return out;
}

IndexMask parse_k(const std::string& s, int n) {
    IndexMask m = 0;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        int i = std::stoi(tok);
        if (i < 1 || i > n) throw ParseError("index " + tok + " out of 1.." + std::to_string(n));
        m |= (1u << (i - 1));
    }
    return m;
}

std::string csv_num(double v) { return jsonio::format_double(v); }

TiltVector resolve_tilt(const std::string& mode, const NetworkSpec& spec, RunContext& ctx) {
    auto dirs = jump_directions(spec);
    if (mode.empty() || mode == "unit") return TiltVector::ones(dirs.size());
    return tilt_from_json(parse_json(ctx.read_input(mode), mode), spec);
}

SPInstance sp_instance(const NetworkSpec& spec, const TiltVector& c) {
    return spec.is_jackson() ? sp_for_jackson(spec.jackson(), c) : sp_for_ps(spec.ps(), c);
}

// --------------------------------------------------------------
// Task bodies shared by direct subcommands and `report` scenarios
// --------------------------------------------------------------

OrderedJson task_validate(const NetworkSpec& spec, bool* ok_out) {
    auto rep = validate(spec);
    OrderedJson j;
    j["valid"] = rep.ok();
    j["violations"] = rep.violations;
    long pairs = 0, failures = 0;
    if (rep.ok()) {
        // communication check over a default box of states
        const int n = spec.size();
        std::vector<StateVec> pts;
        if (std::pow(3.0, n) <= 32.0) {
            long total = 1;
            for (int i = 0; i < n; ++i) total *= 3;
            for (long code = 0; code < total; ++code) {
                StateVec x(n);
                long c = code;
                for (int i = 0; i < n; ++i) {
                    x[i] = c % 3;
                    c /= 3;
                }
                pts.push_back(x);
            }
        } else {
            std::uint64_t h = 99;
            for (int t = 0; t < 8; ++t) {
                StateVec x(n);
                for (int i = 0; i < n; ++i) {
                    h = rng::mix64(h);
                    x[i] = static_cast<long long>(h % 3);
                }
                pts.push_back(x);
            }
        }
        for (const auto& x : pts)
            for (const auto& y : pts) {
                ++pairs;
                auto r = check_communication(spec, x, y);
                if (!r.reachable) ++failures;
            }
    }
    OrderedJson comm;
    comm["pairs"] = pairs;
    comm["failures"] = failures;
    j["communication"] = comm;
    *ok_out = rep.ok() && failures == 0;
    return j;
}

OrderedJson task_rate(const NetworkSpec& spec, IndexMask k, const Vec& beta, bool with_oracle,
                      double resolution) {
    auto sol = local_rate(spec, k, beta);
    auto j = rate_solution_to_json(sol, jump_directions(spec));
    if (with_oracle) {
        LocalModel model(spec, k);
        double o = oracle::brute_force_L(model, beta, resolution);
        j["oracle"] = std::isfinite(o) ? OrderedJson(o) : OrderedJson("inf");
        j["oracle_resolution"] = resolution;
    }
    return j;
}

OrderedJson task_path_rate(const NetworkSpec& spec, const PiecewisePath& path, std::string* csv) {
    auto res = path_rate_detailed(spec, path);
    OrderedJson j;
    if (std::isfinite(res.value)) j["value"] = res.value;
    else j["value"] = "inf";
    OrderedJson segs = OrderedJson::array();
    std::string c = "t0,t1,facet_mask,rate\n";
    for (const auto& s : res.segments) {
        OrderedJson e;
        e["t0"] = s.t0;
        e["t1"] = s.t1;
        e["facet_mask"] = s.facet;
        e["slope"] = s.slope;
        if (std::isfinite(s.local_rate)) e["rate"] = s.local_rate;
        else e["rate"] = "inf";
        segs.push_back(e);
        c += csv_num(s.t0) + "," + csv_num(s.t1) + "," + std::to_string(s.facet) + "," +
             (std::isfinite(s.local_rate) ? csv_num(s.local_rate) : "inf") + "\n";
    }
    j["segments"] = segs;
    if (csv) *csv = c;
    return j;
}

OrderedJson task_sp(const NetworkSpec& spec, const TiltVector& c, const PiecewisePath& psi,
                    double dt, std::string* csv) {
    auto sp = sp_instance(spec, c);
    auto sol = solve_sp(sp, psi, dt);
    OrderedJson j;
    j["verified"] = sol.verified;
    j["verification_failure"] = sol.verification_failure;
    j["total_variation"] = sol.total_variation;
    double sup_phi = 0.0;
    for (const auto& p : sol.phi) sup_phi = std::max(sup_phi, norm_inf(p));
    j["sup_phi"] = sup_phi;
    if (csv) {
        std::string out = "t";
        for (int i = 0; i < spec.size(); ++i) out += ",phi_" + std::to_string(i + 1);
        for (int i = 0; i < spec.size(); ++i) out += ",eta_" + std::to_string(i + 1);
        out += "\n";
        for (std::size_t kk = 0; kk < sol.times.size(); ++kk) {
            out += csv_num(sol.times[kk]);
            for (double v : sol.phi[kk]) out += "," + csv_num(v);
            for (double v : sol.eta[kk]) out += "," + csv_num(v);
            out += "\n";
        }
        *csv = out;
    }
    return j;
}

OrderedJson task_sp_check(const NetworkSpec& spec, const TiltVector& c) {
    auto sp = sp_instance(spec, c);
    auto q = regularity_Q(sp);
    OrderedJson j;
    j["q"] = sp.q();
    j["applicable"] = q.applicable;
    if (q.applicable) {
        OrderedJson qm = OrderedJson::array();
        for (std::size_t i = 0; i < q.Q.rows; ++i) {
            OrderedJson row = OrderedJson::array();
            for (std::size_t jj = 0; jj < q.Q.cols; ++jj) row.push_back(q.Q(i, jj));
            qm.push_back(row);
        }
        j["Q"] = qm;
        j["sigma_Q"] = q.spectral_radius;
        j["regular"] = q.regular;
    }
    if (!spec.is_jackson())
        j["canonical_transform"] = ps_matches_canonical_transform(sp, spec.ps(), c);
    LocalModel model(spec, full_mask(spec.size()));
    auto rep = check_push_cones(model, c, sp);
    OrderedJson c4;
    c4["normals_ok"] = rep.normals_ok;
    c4["all_facets_ok"] = rep.all_facets_ok;
    OrderedJson fl = OrderedJson::array();
    for (const auto& f : rep.facets) {
        OrderedJson e;
        e["facet_mask"] = f.facet;
        e["gap_norm"] = f.gap_norm;
        e["in_cone"] = f.in_cone;
        fl.push_back(e);
    }
    c4["facets"] = fl;
    j["push_cones"] = c4;
    return j;
}

OrderedJson tube_to_json(const TubeEstimate& e) {
    OrderedJson j;
    j["n"] = e.n;
    j["reps"] = e.reps;
    j["p_hat"] = e.p_hat;
    j["standard_error"] = e.standard_error;
    j["band3"] = Vec{std::max(0.0, e.p_hat - 3.0 * e.standard_error),
                     std::min(1.0, e.p_hat + 3.0 * e.standard_error)};
    if (std::isfinite(e.q_hat)) j["q_hat"] = e.q_hat;
    else j["q_hat"] = "inf";
    j["method"] = e.method;
    j["flagged"] = e.flagged;
    return j;
}

OrderedJson task_simulate(const NetworkSpec& spec, IndexMask k, const Vec& beta, double eps,
                          const std::vector<long>& ns, long reps, const std::string& tilt_mode,
                          RunContext& ctx, std::string* csv) {
    LocalModel model(spec, k);
    std::optional<TiltVector> control;
    OrderedJson tilt_json;
    if (tilt_mode == "from-solver") {
        auto sol = local_rate(spec, k, beta);
        if (sol.status == SolveStatus::infinite)
            throw SolverError("simulate: rate solver reports an unattainable velocity");
        control = sol.c;
        tilt_json = tilt_to_json(sol.c, jump_directions(spec));
    } else if (!tilt_mode.empty() && tilt_mode != "unit") {
        control = resolve_tilt(tilt_mode, spec, ctx);
        tilt_json = tilt_to_json(*control, jump_directions(spec));
    }
    OrderedJson j;
    j["tilt"] = control ? tilt_json : OrderedJson("unit");
    OrderedJson results = OrderedJson::array();
    std::string c = "n,p_hat,standard_error,q_hat,method\n";
    for (long n : ns) {
        SimConfig cfg;
        cfg.n = n;
        cfg.reps = reps;
        cfg.seed = ctx.opts.seed;
        cfg.epsilon = eps;
        cfg.beta = beta;
        cfg.control = control;
        TubeEstimate e = control ? is_estimate(model, cfg, ctx.opts.threads)
                                 : estimate_tube_prob(model, cfg, ctx.opts.threads);
        results.push_back(tube_to_json(e));
        c += std::to_string(n) + "," + csv_num(e.p_hat) + "," + csv_num(e.standard_error) + "," +
             (std::isfinite(e.q_hat) ? csv_num(e.q_hat) : "inf") + "," + e.method + "\n";
    }
    j["results"] = results;
    if (csv) *csv = c;
    return j;
}

OrderedJson task_occupancy(const NetworkSpec& spec, IndexMask k, const Vec& beta, long n, long reps,
                           const std::string& tilt_mode, RunContext& ctx, std::string* csv) {
    LocalModel model(spec, k);
    std::optional<TiltVector> control;
    if (tilt_mode == "from-solver") {
        auto sol = local_rate(spec, k, beta);
        if (sol.status == SolveStatus::infinite)
            throw SolverError("occupancy: rate solver reports an unattainable velocity");
        control = sol.c;
    } else if (!tilt_mode.empty() && tilt_mode != "unit") {
        control = resolve_tilt(tilt_mode, spec, ctx);
    }
    SimConfig cfg;
    cfg.n = n;
    cfg.reps = reps;
    cfg.seed = ctx.opts.seed;
    cfg.epsilon = 1.0;
    cfg.beta = beta;
    cfg.control = control;
    std::vector<TrajectorySample> samples(reps);
    detail::parallel_for(reps, ctx.opts.threads,
                         [&](long r) { samples[r] = simulate_path(model, cfg, r); });
    Vec rho = empirical_occupancy(samples);
    OrderedJson j;
    j["n"] = n;
    j["reps"] = reps;
    j["rho"] = rho;
    Vec tau(spec.size(), 0.0);
    for (std::size_t m = 0; m < rho.size(); ++m) {
        IndexMask gi = model.global_facet(static_cast<int>(m));
        for (int i = 0; i < spec.size(); ++i)
            if (!(gi & (1u << i))) tau[i] += rho[m];
    }
    j["tau_implied"] = tau;
    if (csv) {
        std::string c = "facet_mask,rho_hat\n";
        for (std::size_t m = 0; m < rho.size(); ++m)
            c += std::to_string(model.global_facet(static_cast<int>(m))) + "," + csv_num(rho[m]) + "\n";
        *csv = c;
    }
    return j;
}

// --------------------------------------------------------------
// report: run a scenario of tasks, cross-link, write a bundle
// --------------------------------------------------------------

bool check_expectations(const OrderedJson& expect, const OrderedJson& result, OrderedJson& out) {
    bool ok = true;
    for (auto it = expect.begin(); it != expect.end(); ++it) {
        // dotted key paths into the result, e.g. "results.0.q_hat"
        const OrderedJson* cur = &result;
        std::stringstream ss(it.key());
        std::string part;
        bool found = true;
        while (std::getline(ss, part, '.')) {
            if (cur->is_array()) {
                std::size_t idx = std::stoul(part);
                if (idx >= cur->size()) { found = false; break; }
                cur = &(*cur)[idx];
            } else if (cur->is_object() && cur->contains(part)) {
                cur = &cur->at(part);
            } else {
                found = false;
                break;
            }
        }
        OrderedJson entry;
        entry["key"] = it.key();
        if (!found || !cur->is_number()) {
            entry["pass"] = false;
            entry["reason"] = "missing or non-numeric";
            ok = false;
        } else {
            double v = cur->get<double>();
            bool pass = true;
            if (it.value().contains("min") && v < it.value().at("min").get<double>()) pass = false;
            if (it.value().contains("max") && v > it.value().at("max").get<double>()) pass = false;
            entry["value"] = v;
            entry["pass"] = pass;
            if (!pass) ok = false;
        }
        out.push_back(entry);
    }
    return ok;
}

int run_report(const std::string& scenario_path, RunContext& ctx) {
    auto scenario = parse_json(ctx.read_input(scenario_path), scenario_path);
    if (!scenario.is_array()) throw ParseError("scenario: expected a list of task objects");
    bool all_ok = true;
    OrderedJson bundle = OrderedJson::array();
    int idx = 0;
    for (const auto& t : scenario) {
        ++idx;
        OrderedJson entry;
        std::string name = t.value("task", std::string("?"));
        entry["task"] = name;
        try {
            const auto args = t.value("args", OrderedJson::object());
            OrderedJson result;
            std::string csv;
            NetworkSpec spec = args.contains("spec")
                                   ? spec_from_json(parse_json(ctx.read_input(args.at("spec")), "spec"))
                                   : NetworkSpec{};
            auto k_of = [&](const OrderedJson& a) {
                IndexMask k = 0;
                if (a.contains("K"))
                    for (const auto& i : a.at("K")) k |= (1u << (i.get<int>() - 1));
                return k;
            };
            if (name == "validate") {
                bool ok = false;
                result = task_validate(spec, &ok);
                if (!ok) all_ok = false;
            } else if (name == "rate") {
                Vec beta = args.at("beta").get<Vec>();
                result = task_rate(spec, k_of(args), beta, args.value("oracle", false),
                                   args.value("resolution", 0.01));
            } else if (name == "path-rate") {
                auto path = path_from_json(args.at("path"));
                result = task_path_rate(spec, path, &csv);
            } else if (name == "sp") {
                auto tilt = args.contains("tilt_file")
                                ? tilt_from_json(parse_json(ctx.read_input(args.at("tilt_file")), "tilt"), spec)
                                : TiltVector::ones(jump_directions(spec).size());
                auto path = path_from_json(args.at("path"), false);
                result = task_sp(spec, tilt, path, args.value("dt", 1e-3), &csv);
            } else if (name == "sp-check") {
                auto tilt = TiltVector::ones(jump_directions(spec).size());
                result = task_sp_check(spec, tilt);
            } else if (name == "simulate") {
                std::vector<long> ns;
                for (const auto& nn : args.at("n")) ns.push_back(nn.get<long>());
                result = task_simulate(spec, k_of(args), args.at("beta").get<Vec>(),
                                       args.value("epsilon", 0.1), ns, args.value("reps", 1000L),
                                       args.value("tilt", std::string("unit")), ctx, &csv);
            } else if (name == "occupancy") {
                Vec ob = args.contains("beta") ? args.at("beta").get<Vec>() : Vec(spec.size(), 0.0);
                result = task_occupancy(spec, k_of(args), ob, args.value("n", 100L),
                                        args.value("reps", 1000L),
                                        args.value("tilt", std::string("unit")), ctx, &csv);
            } else {
                throw ParseError("unknown task '" + name + "'");
            }
            result["manifest"] = ctx.manifest_digest();
            entry["result"] = result;
            if (t.contains("expect")) {
                OrderedJson checks = OrderedJson::array();
                bool pass = check_expectations(t.at("expect"), result, checks);
                entry["expect"] = checks;
                if (!pass) all_ok = false;
            }
            std::string base = "task_" + std::to_string(idx) + "_" + name;
            ctx.emit(base + ".json", dump_json(result) + "\n");
            if (!csv.empty()) ctx.emit(base + ".csv", csv);
        } catch (const std::exception& e) {
            entry["error"] = e.what();
            all_ok = false;
        }
        bundle.push_back(entry);
    }
    OrderedJson out;
    out["scenario"] = scenario_path;
    out["tasks"] = bundle;
    out["ok"] = all_ok;
    out["manifest"] = ctx.manifest_digest();
    std::cout << dump_json(out) << "\n";
    ctx.emit("report.json", dump_json(out) + "\n");
    ctx.finish();
    return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rate function identification and verification for queueing networks"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOpts opts;
    app.add_option("--seed", opts.seed, "RNG seed for simulation commands");
    app.add_option("--threads", opts.threads, "worker threads for replications");
    app.add_option("--out-dir", opts.out_dir, "directory for emitted artifacts");
    app.add_option("--format", opts.format, "json|csv primary output")->check(CLI::IsMember({"json", "csv"}));

    std::string specfile, pathfile, tilt = "unit", kstr, pointstr, betastr, nstr = "100", scenario;
    double eps = 0.1, dt = 1e-3, resolution = 0.01;
    long reps = 1000;
    bool with_oracle = false;
    std::string sweep;

    auto* c_validate = app.add_subcommand("validate", "check a network spec file");
    c_validate->add_option("spec", specfile)->required();

    auto* c_dump = app.add_subcommand("dump-local", "print the localized intensity table as CSV");
    c_dump->add_option("spec", specfile)->required();
    c_dump->add_option("--K", kstr, "constrained coordinates, e.g. 1,2 (default: all)");

    auto* c_rate = app.add_subcommand("rate", "local rate function L(beta)");
    c_rate->add_option("spec", specfile)->required();
    c_rate->add_option("--K", kstr, "constrained coordinates, e.g. 1,2");
    c_rate->add_option("--point", pointstr, "base point x (derives K from its zero coordinates)");
    c_rate->add_option("--beta", betastr, "velocity, comma separated")->required();
    c_rate->add_flag("--oracle", with_oracle, "also run the brute-force oracle");
    c_rate->add_option("--resolution", resolution, "oracle grid resolution");
    c_rate->add_option("--sweep", sweep, "lo:hi:steps grid over free beta coordinates (CSV)");

    auto* c_path = app.add_subcommand("path-rate", "integral of L along a piecewise linear path");
    c_path->add_option("spec", specfile)->required();
    c_path->add_option("path", pathfile)->required();

    auto* c_sp = app.add_subcommand("sp", "solve the Skorokhod Problem for an input path");
    c_sp->add_option("spec", specfile)->required();
    c_sp->add_option("path", pathfile)->required();
    c_sp->add_option("--tilt", tilt, "unit | tilt file");
    c_sp->add_option("--dt", dt, "time step");

    auto* c_spc = app.add_subcommand("sp-check", "Q-matrix regularity and cone conditions");
    c_spc->add_option("spec", specfile)->required();
    c_spc->add_option("--tilt", tilt, "unit | tilt file");

    auto* c_sim = app.add_subcommand("simulate", "tube probability estimation");
    c_sim->add_option("spec", specfile)->required();
    c_sim->add_option("--K", kstr, "constrained coordinates of the local model");
    c_sim->add_option("--beta", betastr, "tube center velocity")->required();
    c_sim->add_option("--epsilon", eps, "tube radius");
    c_sim->add_option("--n", nstr, "scaling parameter(s), comma separated");
    c_sim->add_option("--reps", reps, "replications");
    c_sim->add_option("--tilt", tilt, "unit | from-solver | tilt file");

    auto* c_occ = app.add_subcommand("occupancy", "empirical facet occupancies");
    c_occ->add_option("spec", specfile)->required();
    c_occ->add_option("--K", kstr, "constrained coordinates of the local model");
    c_occ->add_option("--beta", betastr, "velocity for from-solver tilts (default 0)");
    c_occ->add_option("--n", nstr, "scaling parameter");
    c_occ->add_option("--reps", reps, "replications");
    c_occ->add_option("--tilt", tilt, "unit | from-solver | tilt file");

    auto* c_rep = app.add_subcommand("report", "run a scenario bundle");
    c_rep->add_option("scenario", scenario)->required();

    CLI11_PARSE(app, argc, argv);

    RunContext ctx;
    ctx.opts = opts;

    try {
        if (app.got_subcommand(c_validate)) {
            ctx.command = "validate";
            auto spec = spec_from_json(parse_json(ctx.read_input(specfile), specfile));
            bool ok = false;
            auto j = task_validate(spec, &ok);
            j["manifest"] = ctx.manifest_digest();
            std::cout << dump_json(j) << "\n";
            ctx.emit("validate.json", dump_json(j) + "\n");
            ctx.finish();
            return ok ? 0 : 1;
        }
        if (app.got_subcommand(c_dump)) {
            ctx.command = "dump-local";
            auto spec = spec_from_json(parse_json(ctx.read_input(specfile), specfile));
            IndexMask k = kstr.empty() ? full_mask(spec.size()) : parse_k(kstr, spec.size());
            LocalModel model(spec, k);
            std::string csv = "facet_mask,direction,rate\n";
            for (std::size_t m = 0; m < model.facet_count(); ++m)
                for (std::size_t d = 0; d < model.directions().size(); ++d)
                    csv += std::to_string(model.global_facet(static_cast<int>(m))) + "," +
                           model.directions()[d].name() + "," +
                           csv_num(model.facet_rates_local(static_cast<int>(m))[d]) + "\n";
            std::cout << csv;
            ctx.emit("local_table.csv", csv);
            ctx.finish();
            return 0;
        }
        if (app.got_subcommand(c_rate)) {
            ctx.command = "rate";
            auto spec = spec_from_json(parse_json(ctx.read_input(specfile), specfile));
            IndexMask k = 0;
            if (!pointstr.empty()) {
                Vec pt = parse_doubles(pointstr);
                if (static_cast<int>(pt.size()) != spec.size()) throw ParseError("point size != N");
                k = facet_index(pt, full_mask(spec.size()));
            } else if (!kstr.empty()) {
                k = parse_k(kstr, spec.size());
            }
            Vec beta = parse_doubles(betastr);
            if (static_cast<int>(beta.size()) != spec.size()) throw ParseError("beta size != N");
            if (!sweep.empty()) {
                double lo, hi;
                int steps;
                if (std::sscanf(sweep.c_str(), "%lf:%lf:%d", &lo, &hi, &steps) != 3 || steps < 1)
                    throw ParseError("--sweep wants lo:hi:steps");
                std::vector<int> free_idx;
                for (int i = 0; i < spec.size(); ++i)
                    if (!(k & (1u << i))) free_idx.push_back(i);
                std::string csv;
                for (int i = 0; i < spec.size(); ++i) csv += "beta_" + std::to_string(i + 1) + ",";
                csv += "L,status\n";
                long total = 1;
                for (std::size_t i = 0; i < free_idx.size(); ++i) total *= (steps + 1);
                for (long code = 0; code < total; ++code) {
                    Vec b(spec.size(), 0.0);
                    long cc = code;
                    for (int fi : free_idx) {
                        b[fi] = lo + (hi - lo) * static_cast<double>(cc % (steps + 1)) / steps;
                        cc /= (steps + 1);
                    }
                    auto sol = local_rate(spec, k, b);
                    for (double bi : b) csv += csv_num(bi) + ",";
                    csv += (std::isfinite(sol.value) ? csv_num(sol.value) : "inf");
                    csv += std::string(",") + to_string(sol.status) + "\n";
                }
                std::cout << csv;
                ctx.emit("rate_sweep.csv", csv);
                ctx.finish();
                return 0;
            }
            auto j = task_rate(spec, k, beta, with_oracle, resolution);
            j["manifest"] = ctx.manifest_digest();
            std::cout << dump_json(j) << "\n";
            ctx.emit("rate.json", dump_json(j) + "\n");
            ctx.finish();
            return 0;
        }
        if (app.got_subcommand(c_path)) {
            ctx.command = "path-rate";
            auto spec = spec_from_json(parse_json(ctx.read_input(specfile), specfile));
            auto path = path_from_json(parse_json(ctx.read_input(pathfile), pathfile));
            std::string csv;
            auto j = task_path_rate(spec, path, &csv);
            j["manifest"] = ctx.manifest_digest();
            if (opts.format == "csv") std::cout << csv;
            else std::cout << dump_json(j) << "\n";
            ctx.emit("path_rate.json", dump_json(j) + "\n");
            ctx.emit("path_segments.csv", csv);
            ctx.finish();
            return 0;
        }
        if (app.got_subcommand(c_sp)) {
            ctx.command = "sp";
            auto spec = spec_from_json(parse_json(ctx.read_input(specfile), specfile));
            auto c = resolve_tilt(tilt, spec, ctx);
            auto path = path_from_json(parse_json(ctx.read_input(pathfile), pathfile), false);
            std::string csv;
            auto j = task_sp(spec, c, path, dt, &csv);
            j["manifest"] = ctx.manifest_digest();
            if (opts.format == "csv") std::cout << csv;
            else std::cout << dump_json(j) << "\n";
            ctx.emit("sp.json", dump_json(j) + "\n");
            ctx.emit("sp_path.csv", csv);
            ctx.finish();
            return j.at("verified").get<bool>() ? 0 : 1;
        }
        if (app.got_subcommand(c_spc)) {
            ctx.command = "sp-check";
            auto spec = spec_from_json(parse_json(ctx.read_input(specfile), specfile));
            auto c = resolve_tilt(tilt, spec, ctx);
            auto j = task_sp_check(spec, c);
            j["manifest"] = ctx.manifest_digest();
            std::cout << dump_json(j) << "\n";
            ctx.emit("sp_check.json", dump_json(j) + "\n");
            ctx.finish();
            return 0;
        }
        if (app.got_subcommand(c_sim)) {
            ctx.command = "simulate";
            auto spec = spec_from_json(parse_json(ctx.read_input(specfile), specfile));
            IndexMask k = kstr.empty() ? 0 : parse_k(kstr, spec.size());
            Vec beta = parse_doubles(betastr);
            std::vector<long> ns;
            for (double v : parse_doubles(nstr)) ns.push_back(std::lround(v));
            std::string csv;
            auto j = task_simulate(spec, k, beta, eps, ns, reps, tilt, ctx, &csv);
            j["manifest"] = ctx.manifest_digest();
            if (opts.format == "csv") std::cout << csv;
            else std::cout << dump_json(j) << "\n";
            ctx.emit("simulate.json", dump_json(j) + "\n");
            ctx.emit("simulate.csv", csv);
            ctx.finish();
            return 0;
        }
        if (app.got_subcommand(c_occ)) {
            ctx.command = "occupancy";
            auto spec = spec_from_json(parse_json(ctx.read_input(specfile), specfile));
            IndexMask k = kstr.empty() ? full_mask(spec.size()) : parse_k(kstr, spec.size());
            long n = std::lround(parse_doubles(nstr).at(0));
            Vec beta = betastr.empty() ? Vec(spec.size(), 0.0) : parse_doubles(betastr);
            std::string csv;
            auto j = task_occupancy(spec, k, beta, n, reps, tilt, ctx, &csv);
            j["manifest"] = ctx.manifest_digest();
            if (opts.format == "csv") std::cout << csv;
            else std::cout << dump_json(j) << "\n";
            ctx.emit("occupancy.json", dump_json(j) + "\n");
            ctx.emit("occupancy.csv", csv);
            ctx.finish();
            return 0;
        }
        if (app.got_subcommand(c_rep)) {
            ctx.command = "report";
            return run_report(scenario, ctx);
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
