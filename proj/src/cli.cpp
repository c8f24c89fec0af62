#include "dfext/cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include "dfext/cusp.hpp"
#include "dfext/extend_l1.hpp"
#include "dfext/extend_w11.hpp"
#include "dfext/verify.hpp"

namespace dfext::cli {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << text;
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

std::shared_ptr<const Domain> make_domain(const RunConfig& cfg) {
    if (!cfg.json.contains("domain")) throw ConfigError("config: 'domain' is required");
    return std::make_shared<const Domain>(Domain::from_json(cfg.json["domain"]));
}

FieldPtr make_field(const RunConfig& cfg, const std::shared_ptr<const Domain>& dom) {
    if (!cfg.json.contains("field")) throw ConfigError("config: 'field' is required");
    FieldPtr u = field_from_json(cfg.json["field"]);
    if (u->dim() != dom->dim()) throw ConfigError("config: field and domain dimensions differ");
    const double eps = cfg.json.value("mollify", 0.0);
    if (eps > 0) u = mollified_field(u, dom, eps);
    return u;
}

const json& section(const RunConfig& cfg, const char* name) {
    static const json empty = json::object();
    return cfg.json.contains(name) ? cfg.json[name] : empty;
}

// Either extension behind one evaluation interface.
struct Extension {
    std::unique_ptr<L1Extension> l1;
    std::unique_ptr<W11Extension> w11;

    Vec evaluate(const Vec& y) const { return l1 ? l1->evaluate(y) : w11->assemble(y); }
    // Beyond this distance the extension vanishes identically.
    double zero_radius() const { return l1 ? l1->support_radius() : 2.0 * w11->support_radius(); }
    double theta() const { return l1 ? l1->support_radius() : w11->support_radius(); }
};

Extension make_extension(const RunConfig& cfg) {
    auto dom = make_domain(cfg);
    FieldPtr u = make_field(cfg, dom);
    const json& ext = section(cfg, "extension");
    Extension e;
    if (cfg.json.value("mode", std::string("l1")) == "w11") e.w11 = std::make_unique<W11Extension>(dom, u, W11Config::from_json(ext));
    else e.l1 = std::make_unique<L1Extension>(dom, u, ExtensionConfig::from_json(ext));
    return e;
}

json invariant_json(const InvariantReport& r) {
    return {{"ok", r.ok},
            {"cubes", r.cubes},
            {"w3_lo", r.w3_lo},
            {"w3_hi", r.w3_hi},
            {"w3_c", r.w3_c},
            {"blowups_inside", r.blowups_inside},
            {"disjoint", r.disjoint},
            {"max_overlap", r.max_overlap},
            {"psi_size_lo", r.psi_size_lo},
            {"psi_size_hi", r.psi_size_hi},
            {"psi_dist_c", r.psi_dist_c},
            {"psi_depth_lo", r.psi_depth_lo},
            {"psi_depth_hi", r.psi_depth_hi},
            {"psi_sep_lo", r.psi_sep_lo},
            {"coverage_failures", r.coverage_failures},
            {"messages", r.messages}};
}

std::uint64_t seed_of(const RunConfig& cfg, std::uint64_t fallback) { return cfg.json.value("seed", fallback); }

}  // namespace

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------- configuration

RunConfig RunConfig::parse(const nlohmann::json& j, const Overrides& ov) {
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    RunConfig c;
    c.json = j;
    nlohmann::json& ext = c.json["extension"];
    if (ext.is_null()) ext = nlohmann::json::object();
    if (!ext.is_object()) throw ConfigError("config: 'extension' must be an object");
    if (ov.seed) c.json["seed"] = *ov.seed;
    if (ov.quad_order) ext["outer_order"] = *ov.quad_order;
    if (ov.simplex) ext["simplex"] = *ov.simplex;
    if (ov.mode) c.json["mode"] = *ov.mode;
    if (c.json.contains("seed") && !ext.contains("seed")) ext["seed"] = c.json["seed"];

    const std::string mode = c.json.value("mode", std::string("l1"));
    if (mode != "l1" && mode != "w11") throw ConfigError("config: mode must be l1 or w11");
    c.json["mode"] = mode;
    try {
        if (c.json.contains("domain")) (void)Domain::from_json(c.json["domain"]);
        if (c.json.contains("field")) (void)field_from_json(c.json["field"]);
        if (mode == "w11") (void)W11Config::from_json(ext);
        else (void)ExtensionConfig::from_json(ext);
        if (c.json.contains("counterexample")) (void)CounterexampleArgs::from_json(c.json["counterexample"]);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (c.json.contains("mollify") && !(c.json["mollify"].is_number() && c.json["mollify"].get<double>() >= 0))
        throw ConfigError("config: 'mollify' must be a non-negative number");
    if (c.json.contains("grid")) {
        const nlohmann::json& g = c.json["grid"];
        if (!g.is_object()) throw ConfigError("config: 'grid' must be an object");
        for (const char* k : {"lo", "hi", "points"})
            if (g.contains(k) && !g[k].is_array()) throw ConfigError(std::string("config: grid.") + k + " must be an array");
    }
    return c;
}

RunConfig RunConfig::load(const fs::path& path, const Overrides& ov) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    return parse(j, ov);
}

std::uint64_t RunConfig::hash() const { return fnv1a(json.dump()); }

std::string RunConfig::hash_hex() const {
    std::ostringstream os;
    os << std::hex << hash();
    std::string s = os.str();
    return std::string(16 - s.size(), '0') + s;
}

// ---------------------------------------------------------------- cover

CommandResult cmd_cover(const RunConfig& cfg, const fs::path& out) {
    auto dom = make_domain(cfg);
    const json& cs = section(cfg, "cover");
    const int li = cs.value("interior_level", 6), le = cs.value("exterior_level", 6);
    const int samples = cs.value("samples", 2000);
    if (li < 0 || le < 0 || samples < 1) throw ConfigError("cover: levels and samples must be positive");
    WhitneyCover cover(dom);
    const CoverList in = cover.build(Side::Interior, li);
    const CoverList ex = cover.build(Side::Exterior, le, cover.theta());
    const InvariantReport rep = cover.check_invariants(in, ex, samples, seed_of(cfg, 1));

    fs::create_directories(out);
    CommandResult r;
    for (const auto& [name, list] : {std::pair<const char*, const CoverList*>{"cover_interior.csv", &in},
                                     {"cover_exterior.csv", &ex}}) {
        std::ostringstream os;
        cover.write_csv(os, *list);
        write_text(out / name, os.str());
        r.files.push_back(out / name);
    }
    r.summary = {{"command", "cover"},
                 {"config_hash", cfg.hash_hex()},
                 {"domain", dom->to_json()},
                 {"eta", cover.eta()},
                 {"theta", cover.theta()},
                 {"interior", {{"max_level", li}, {"cubes", in.cubes.size()}, {"deficit_cubes", in.deficit_cubes},
                               {"deficit_measure", in.deficit_measure}}},
                 {"exterior", {{"max_level", le}, {"cubes", ex.cubes.size()}, {"deficit_cubes", ex.deficit_cubes},
                               {"deficit_measure", ex.deficit_measure}}},
                 {"reflection_fallbacks", cover.fallback_count()},
                 {"invariants", invariant_json(rep)},
                 {"pass", rep.ok}};
    write_json(out / "cover_report.json", r.summary);
    r.files.push_back(out / "cover_report.json");
    r.exit_code = rep.ok ? kPass : kInvariantFailure;
    return r;
}

// ---------------------------------------------------------------- extend

CommandResult cmd_extend(const RunConfig& cfg, const fs::path& out) {
    const Extension e = make_extension(cfg);
    const Domain& dom = e.l1 ? e.l1->domain() : e.w11->domain();
    const Field& u = e.l1 ? e.l1->field() : e.w11->field();
    const int n = dom.dim();

    const json& g = section(cfg, "grid");
    Vec lo = dom.bbox_lo().array() - 1.25 * e.zero_radius(), hi = dom.bbox_hi().array() + 1.25 * e.zero_radius();
    std::vector<int> pts(static_cast<std::size_t>(n), 21);
    try {
        if (g.contains("lo"))
            for (int d = 0; d < n; ++d) lo[d] = g["lo"].at(d).get<double>();
        if (g.contains("hi"))
            for (int d = 0; d < n; ++d) hi[d] = g["hi"].at(d).get<double>();
        if (g.contains("points"))
            for (int d = 0; d < n; ++d) pts[d] = g["points"].at(d).get<int>();
    } catch (const json::exception& ex) {
        throw ConfigError(std::string("grid: ") + ex.what());
    }
    for (int d = 0; d < n; ++d)
        if (pts[d] < 1 || !(hi[d] >= lo[d])) throw ConfigError("grid: need points >= 1 and hi >= lo on every axis");

    std::string csv;
    const char* names[3] = {"x", "y", "z"};
    for (int d = 0; d < n; ++d) csv += std::string(names[d]) + ",";
    for (int d = 0; d < n; ++d) csv += "u" + std::to_string(d + 1) + ",";
    csv += "region\n";

    std::size_t rows = 0, interior = 0, exterior = 0, zero = 0, mismatches = 0, nonzero = 0, unresolved = 0;
    std::array<int, 3> it{0, 0, 0};
    Vec y(n);
    while (true) {
        for (int d = 0; d < n; ++d) y[d] = pts[d] == 1 ? lo[d] : lo[d] + (hi[d] - lo[d]) * it[d] / (pts[d] - 1);
        Vec v(n);
        bool resolved = true;
        try {
            v = e.evaluate(y);
        } catch (const CoverError&) {
            // Closer to the boundary than the deepest cube level.
            v.setConstant(std::numeric_limits<double>::quiet_NaN());
            resolved = false;
            ++unresolved;
        }
        const char* region;
        if (!resolved) {
            region = "exterior";
            ++exterior;
        } else if (dom.contains(y)) {
            region = "interior";
            ++interior;
            if (v != u.value(y)) ++mismatches;
        } else if (-dom.signed_distance(y) > e.zero_radius()) {
            region = "zero";
            ++zero;
            if (!(v.array() == 0.0).all()) ++nonzero;
        } else {
            region = "exterior";
            ++exterior;
        }
        for (int d = 0; d < n; ++d) csv += format_double(y[d]) + ",";
        for (int d = 0; d < n; ++d) csv += format_double(v[d]) + ",";
        csv += region;
        csv += '\n';
        ++rows;
        int d = n - 1;
        while (d >= 0) {
            if (++it[d] < pts[d]) break;
            it[d] = 0;
            --d;
        }
        if (d < 0) break;
    }

    json norms = nullptr;
    if (e.l1) {
        const int level = section(cfg, "norms").value("max_level", 5);
        norms = json::object();
        for (double p : {1.0, 2.0, std::numeric_limits<double>::infinity()}) {
            const NormRatio nr = norm_ratio(*e.l1, p, level);
            norms[std::isinf(p) ? "inf" : format_double(p)] = {
                {"ratio", nr.ratio}, {"extension_norm", nr.extension_norm}, {"field_norm", nr.field_norm},
                {"max_level", nr.max_level}, {"nodes", nr.nodes}};
        }
    }

    fs::create_directories(out);
    CommandResult r;
    write_text(out / "extend.csv", csv);
    r.files.push_back(out / "extend.csv");
    const bool ok = mismatches == 0 && nonzero == 0;
    r.summary = {{"command", "extend"},
                 {"config_hash", cfg.hash_hex()},
                 {"mode", cfg.json["mode"]},
                 {"theta", e.theta()},
                 {"zero_radius", e.zero_radius()},
                 {"rows", rows},
                 {"regions", {{"interior", interior}, {"exterior", exterior}, {"zero", zero}}},
                 {"interior_mismatches", mismatches},
                 {"zero_region_nonzero", nonzero},
                 {"unresolved", unresolved},
                 {"norm_ratios", norms},
                 {"pass", ok}};
    if (e.l1) r.summary["notices"] = e.l1->notices();
    else r.summary["notices"] = e.w11->notices();
    write_json(out / "extend_summary.json", r.summary);
    r.files.push_back(out / "extend_summary.json");
    r.exit_code = ok ? kPass : kInvariantFailure;
    return r;
}

// ---------------------------------------------------------------- counterexample

CounterexampleArgs CounterexampleArgs::from_json(const json& j) {
    CounterexampleArgs a;
    try {
        a.gamma = j.value("gamma", a.gamma);
        a.side = j.value("side", a.side);
        a.n = j.value("n", a.n);
        if (j.contains("p")) a.p = j["p"].get<double>();
        if (j.contains("alpha")) a.alpha = j["alpha"].get<double>();
        if (j.contains("control_p")) a.control_p = j["control_p"].get<double>();
        a.s_min = j.value("s_min", a.s_min);
        a.flux_points = j.value("flux_points", a.flux_points);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("counterexample: ") + e.what());
    }
    return a;
}

namespace {

struct ResolvedScenario {
    CuspScenario scenario;
    ExponentWindow window;
    double control_p = 0.0;
};

ResolvedScenario resolve(const CounterexampleArgs& a) {
    ResolvedScenario r;
    const CuspSide side = cusp_side_from_string(a.side);
    r.window = exponent_window(a.gamma, a.n, side);
    double p = 0.0, alpha = 0.0;
    auto mid = [](const Interval& i) { return 0.5 * (i.lo + i.hi); };
    if (a.p) {
        p = *a.p;
        alpha = a.alpha ? *a.alpha : mid(r.window.alpha_for_p(p));
    } else if (a.alpha) {
        alpha = *a.alpha;
        p = mid(r.window.p_for_alpha(alpha));
    } else {
        p = side == CuspSide::Plus ? 1.0 : 1.25 * r.window.p_min;
        if (r.window.alpha_for_p(p).empty()) p = mid(r.window.p_for_alpha(mid(r.window.alpha)));
        alpha = mid(r.window.alpha_for_p(p));
    }
    r.scenario = CuspScenario::make(a.gamma, alpha, p, side, a.n);
    if (a.control_p) {
        r.control_p = *a.control_p;
    } else {
        // Two thirds of the p at which the lower-bound exponent crosses -1.
        const double k = (a.n - 1) / a.gamma;
        const double crit = side == CuspSide::Plus ? (1.0 + a.gamma) / (alpha + a.gamma - 1.0)
                                                   : (1.0 + k) / (alpha + k - 1.0);
        r.control_p = crit * 2.0 / 3.0;
    }
    return r;
}

}  // namespace

CommandResult cmd_counterexample(const CounterexampleArgs& args, const fs::path& out, const std::string& config_hash) {
    ResolvedScenario rs;
    try {
        rs = resolve(args);
    } catch (const CuspError& e) {
        throw ConfigError(e.what());
    }
    if (args.flux_points < 2 || !(args.s_min > 0 && args.s_min < rs.scenario.eta))
        throw ConfigError("counterexample: need flux_points >= 2 and 0 < s_min < eta");
    const Report rep = cusp_suite(rs.scenario, rs.control_p, args.s_min, args.flux_points);
    CommandResult r;
    r.summary = {{"command", "counterexample"},
                 {"config_hash", config_hash},
                 {"window", rs.window.to_json()},
                 {"scenario", rs.scenario.to_json()},
                 {"flux_table", rep.details["flux_table"]},
                 {"lower_bound", rep.details["lower_bound"]},
                 {"growth_fit", {{"fitted", rep.fitted_order.value_or(0.0)}, {"expected", rs.scenario.growth()}}},
                 {"control", rep.details["control"]},
                 {"report", rep.to_json()},
                 {"pass", rep.pass}};
    r.summary["report"]["details"].erase("flux_table");
    r.summary["report"]["details"].erase("lower_bound");
    fs::create_directories(out);
    write_json(out / "counterexample.json", r.summary);
    r.files.push_back(out / "counterexample.json");
    r.exit_code = rep.pass ? kPass : kInvariantFailure;
    return r;
}

// ---------------------------------------------------------------- verify

CommandResult cmd_verify(const std::string& suite, const RunConfig& cfg, const fs::path& out) {
    const json& vs = section(cfg, "verify");
    const std::uint64_t seed = seed_of(cfg, 1);
    std::vector<Report> reports;
    if (suite == "l1-core") {
        if (cfg.json["mode"] != "l1") throw ConfigError("verify l1-core: needs mode l1");
        const Extension e = make_extension(cfg);
        const L1Extension& x = *e.l1;
        const json& o = vs.contains("l1-core") ? vs["l1-core"] : json::object();
        reports.push_back(restriction_support_check(x, o.value("interior_samples", 1000), o.value("exterior_samples", 200), seed));

        WeakQuadrature q;
        q.min_level = o.value("weak_min_level", 6);
        q.max_level = o.value("weak_max_level", 9);
        q.richardson = o.value("weak_richardson", 1);
        const double scale = std::min(1.0, 0.5 * x.domain().diameter());
        const auto tests = straddling_tests(x.domain(), o.value("weak_tests", 4), seed, 0.2 * scale, 0.4 * scale);
        const auto res = weak_div_residual(x, tests, q);
        Report w;
        w.check = "weak_divergence";
        w.params = {{"tests", tests.size()}, {"quadrature", q.to_json()}, {"tolerance", "1e-4 sup|grad psi| ||u||_1"}};
        for (const WeakResidual& t : res) {
            w.residuals.push_back(t.residual);
            w.pass = w.pass && t.residual <= 1e-4 * t.scale;
        }
        reports.push_back(w);

        Report nr;
        nr.check = "norm_ratio";
        nr.params = {{"max_level", 5}};
        for (double p : {1.0, std::numeric_limits<double>::infinity()}) {
            const NormRatio v = norm_ratio(x, p, 5);
            nr.residuals.push_back(v.ratio);
            nr.pass = nr.pass && std::isfinite(v.ratio) && v.ratio >= 1.0;
        }
        reports.push_back(nr);
        reports.push_back(stokes_suite(x.domain().dim(), o.value("stokes_simplices", 200), seed));
    } else if (suite == "w11-identities") {
        if (cfg.json["mode"] != "w11") throw ConfigError("verify w11-identities: needs mode w11");
        const Extension e = make_extension(cfg);
        const json& o = vs.contains("w11-identities") ? vs["w11-identities"] : json::object();
        W11SuiteOptions opt;
        opt.points = o.value("points", opt.points);
        opt.seed = seed;
        opt.solenoidal = o.value("solenoidal", opt.solenoidal);
        reports.push_back(w11_identity_suite(*e.w11, opt));
    } else if (suite == "cusp") {
        const CounterexampleArgs a = CounterexampleArgs::from_json(section(cfg, "counterexample"));
        ResolvedScenario rs;
        try {
            rs = resolve(a);
        } catch (const CuspError& ex) {
            throw ConfigError(ex.what());
        }
        reports.push_back(cusp_suite(rs.scenario, rs.control_p, a.s_min, a.flux_points));
    } else {
        throw ConfigError("verify: unknown suite '" + suite + "' (expected l1-core, w11-identities or cusp)");
    }

    bool pass = true;
    json arr = json::array();
    for (const Report& r : reports) {
        pass = pass && r.pass;
        arr.push_back(r.to_json());
    }
    CommandResult r;
    r.summary = {{"command", "verify"}, {"suite", suite}, {"config_hash", cfg.hash_hex()}, {"reports", arr}, {"pass", pass}};
    fs::create_directories(out);
    const fs::path file = out / ("verify_" + suite + ".json");
    write_json(file, r.summary);
    r.files.push_back(file);
    r.exit_code = pass ? kPass : kInvariantFailure;
    return r;
}

}  // namespace dfext::cli
