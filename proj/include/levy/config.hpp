#pragma once

// Run configuration: a JSON key tree parsed into typed blocks, echoed back
// with every default filled in, and assembled into a ProblemSpec.

#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "levy/errors.hpp"
#include "levy/grid.hpp"
#include "levy/kernel.hpp"
#include "levy/local_op.hpp"
#include "levy/measure.hpp"
#include "levy/solver.hpp"

namespace levy::config {

using json = nlohmann::ordered_json;

/// Accumulates problems so a bad config is reported in one pass.
struct Issues {
    std::vector<std::string> list;
    void add(const std::string& where, const std::string& what) { list.push_back(where + ": " + what); }
    [[nodiscard]] bool empty() const { return list.empty(); }
    [[noreturn]] void raise() const {
        std::string msg = std::to_string(list.size()) + " problem(s) in config";
        for (const auto& s : list) msg += "\n  " + s;
        throw ConfigError(msg);
    }
};

/// Typed view of one JSON object that records bad and unknown keys.
class Block {
public:
    Block(const json* j, std::string path, Issues& issues) : j_(j), path_(std::move(path)), issues_(&issues) {
        if (j_ && !j_->is_object()) {
            issues_->add(path_, "expected an object");
            j_ = nullptr;
        }
    }

    [[nodiscard]] bool has(const std::string& key) {
        seen_.insert(key);
        return j_ && j_->contains(key) && !(*j_)[key].is_null();
    }

    template <class T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) return fallback;
        try {
            return (*j_)[key].get<T>();
        } catch (const json::exception& e) {
            issues_->add(where(key), type_message(e));
            return fallback;
        }
    }

    template <class T>
    std::optional<T> opt(const std::string& key) {
        if (!has(key)) return std::nullopt;
        try {
            return (*j_)[key].get<T>();
        } catch (const json::exception& e) {
            issues_->add(where(key), type_message(e));
            return std::nullopt;
        }
    }

    Block child(const std::string& key) {
        return Block(has(key) ? &(*j_)[key] : nullptr, where(key), *issues_);
    }

    [[nodiscard]] const json* raw(const std::string& key) {
        return has(key) ? &(*j_)[key] : nullptr;
    }

    [[nodiscard]] std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    [[nodiscard]] Issues& issues() { return *issues_; }

    /// Flags keys that no reader asked for.
    void finish() {
        if (!j_) return;
        for (auto it = j_->begin(); it != j_->end(); ++it)
            if (!seen_.count(it.key())) issues_->add(where(it.key()), "unknown key");
    }

private:
    static std::string type_message(const json::exception& e) {
        std::string m = e.what();
        const auto p = m.find("] ");
        return p == std::string::npos ? m : m.substr(p + 2);
    }

    const json* j_;
    std::string path_;
    Issues* issues_;
    std::set<std::string> seen_;
};

inline void check_expression(Block& b, const std::string& key, const std::string& text, int dim) {
    try {
        (void)ScalarField::from_expression(text, dim);
    } catch (const Error& e) {
        b.issues().add(b.where(key), e.what());
    }
}

// ---------------------------------------------------------------------------
// Blocks

struct DomainConfig {
    std::vector<double> lo{-2.0}, hi{2.0};
    std::string omega = "ball";  // ball | box | halfspace
    std::vector<double> center{0.0};
    double radius = 1.0;
    std::vector<double> omega_lo, omega_hi;
    std::vector<double> normal;
    double offset = 0.0;
    std::string g = "0";

    [[nodiscard]] int dim() const { return static_cast<int>(lo.size()); }
};

struct MeasureConfig {
    std::string family = "power_law";  // power_law | tabulated | density
    double alpha0 = 1.0;
    int dim_m = 0;  // 0: follow the kernel
    std::optional<double> mu;
    std::optional<double> z_max;
    std::optional<double> epsilon;
    int nodes_per_shell = 8;
    int angles_per_shell = 16;
    double growth_ratio = 2.0;
    std::vector<double> radii, values;
    double tail_exponent = 2.0;
    std::string density;  // expression in x0 = |z|
    std::optional<double> support_radius;
};

struct KernelConfig {
    std::string variant = "identity";  // identity | radial_scale | rotational | gradient_direction | axis
    int dim_n = 0;                     // 0: the domain dimension
    int dim_m = 0;                     // 0: N for identity/radial_scale, else 1
    double eps0 = 0.1;
    int axis = 0;
    KernelConstants constants{};
};

struct MapConfig {
    std::string form = "identity";  // identity | cubic
    double kappa = 0.0;
};

struct TermConfig {
    KernelConfig kernel;
    MeasureConfig measure;
    MapConfig G;
};

struct LocalConfig {
    double gamma = 1.0;
    double c = 0.0;
    std::string f = "0";
    /// Lipschitz constant of f for the structure check; estimated when absent.
    std::optional<double> modulus;
};

struct SolverBlock {
    double tol = 1e-6;
    long max_iter = 200000;
    std::optional<double> epsilon;
    std::optional<double> z_max;
    std::optional<double> dt;
};

struct EvolutionBlock {
    double T = 1.0;
    std::vector<double> checkpoints;
};

struct McBlock {
    double eps_cut = 1e-3;
    double dt_drift = 1e-3;
    long n_paths = 10000;
    std::optional<double> t_max;
    std::vector<std::vector<double>> probes{{0.0}};
};

struct VerifyBlock {
    /// Expression, or one of "perron_lower", "perron_upper", "solution".
    std::string u = "perron_lower";
    std::string v = "perron_upper";
    double tol = 1e-6;
    double delta = 0.0;
};

struct StudyCase {
    std::string name;
    std::string u;
    std::vector<double> x;
};

struct StudyBlock {
    std::vector<StudyCase> cases{{"gauss", "exp(-x0^2)", {0.3}}};
    std::vector<double> eps{0.125, 0.0625, 0.03125, 0.015625, 0.0078125};
    std::vector<double> deltas{0.0, 0.1};
    double z_max = 64.0;
    int nodes_per_shell = 16;
};

struct TableBlock {
    std::string u = "cos(x0)";
    std::vector<std::vector<double>> points{{0.0}};
};

struct RunConfig {
    DomainConfig domain;
    int n_cells = 64;
    std::vector<TermConfig> terms{TermConfig{}};
    LocalConfig F;
    std::optional<std::string> u0;
    SolverBlock solver;
    EvolutionBlock evolution;
    McBlock mc;
    VerifyBlock verify;
    StudyBlock study;
    TableBlock table;
    std::string output_dir = "out";
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline int default_kernel_m(const KernelConfig& k, int n) {
    return (k.variant == "identity" || k.variant == "radial_scale") ? n : 1;
}

inline MeasureConfig parse_measure(Block b, int kernel_m) {
    MeasureConfig m;
    m.family = b.get<std::string>("family", m.family);
    m.alpha0 = b.get<double>("alpha0", m.alpha0);
    m.dim_m = b.get<int>("dim_m", kernel_m);
    m.mu = b.opt<double>("mu");
    m.z_max = b.opt<double>("z_max");
    m.epsilon = b.opt<double>("epsilon");
    m.nodes_per_shell = b.get<int>("nodes_per_shell", m.nodes_per_shell);
    m.angles_per_shell = b.get<int>("angles_per_shell", m.angles_per_shell);
    m.growth_ratio = b.get<double>("growth_ratio", m.growth_ratio);
    m.radii = b.get<std::vector<double>>("radii", {});
    m.values = b.get<std::vector<double>>("values", {});
    m.tail_exponent = b.get<double>("tail_exponent", m.tail_exponent);
    m.density = b.get<std::string>("density", "");
    m.support_radius = b.opt<double>("support_radius");
    if (m.family != "power_law" && m.family != "tabulated" && m.family != "density") {
        b.issues().add(b.where("family"), "expected power_law, tabulated or density, got '" + m.family + "'");
    }
    if (m.family == "density") {
        if (m.density.empty()) b.issues().add(b.where("density"), "density family needs an expression in x0 = |z|");
        else check_expression(b, "density", m.density, 1);
    }
    if (m.family == "tabulated" && (m.radii.size() < 2 || m.radii.size() != m.values.size())) {
        b.issues().add(b.where("radii"), "tabulated family needs matching radii and values (at least 2)");
    }
    b.finish();
    return m;
}

inline KernelConfig parse_kernel(Block b, int n) {
    KernelConfig k;
    k.variant = b.get<std::string>("variant", k.variant);
    static const std::set<std::string> variants{"identity", "radial_scale", "rotational", "gradient_direction", "axis"};
    if (!variants.count(k.variant)) b.issues().add(b.where("variant"), "unknown kernel variant '" + k.variant + "'");
    k.dim_n = b.get<int>("dim_n", n);
    k.dim_m = b.get<int>("dim_m", default_kernel_m(k, k.dim_n));
    k.eps0 = b.get<double>("eps0", k.eps0);
    k.axis = b.get<int>("axis", k.axis);
    Block c = b.child("constants");
    k.constants.B0 = c.get<double>("B0", k.constants.B0);
    k.constants.B1 = c.get<double>("B1", k.constants.B1);
    k.constants.B2 = c.get<double>("B2", k.constants.B2);
    k.constants.B3 = c.get<double>("B3", k.constants.B3);
    k.constants.R = c.get<double>("R", k.constants.R);
    c.finish();
    b.finish();
    return k;
}

inline MapConfig parse_map(Block b) {
    MapConfig g;
    g.form = b.get<std::string>("form", g.form);
    g.kappa = b.get<double>("kappa", g.kappa);
    if (g.form != "identity" && g.form != "cubic") b.issues().add(b.where("form"), "expected identity or cubic");
    b.finish();
    return g;
}

inline TermConfig parse_term(Block b, int n) {
    TermConfig t;
    t.kernel = parse_kernel(b.child("kernel"), n);
    t.measure = parse_measure(b.child("measure"), t.kernel.dim_m);
    t.G = parse_map(b.child("G"));
    b.finish();
    return t;
}

inline std::vector<std::vector<double>> parse_points(Block& b, const std::string& key,
                                                     std::vector<std::vector<double>> fallback, int dim) {
    auto pts = b.get<std::vector<std::vector<double>>>(key, std::move(fallback));
    for (std::size_t i = 0; i < pts.size(); ++i)
        if (static_cast<int>(pts[i].size()) != dim) {
            b.issues().add(b.where(key) + "[" + std::to_string(i) + "]", "point must have " + std::to_string(dim) + " coordinates");
        }
    return pts;
}

}  // namespace detail

inline RunConfig parse(const json& root) {
    Issues issues;
    RunConfig c;
    Block top(&root, "", issues);

    Block d = top.child("domain");
    Block box = d.child("box");
    c.domain.lo = box.get<std::vector<double>>("lo", c.domain.lo);
    c.domain.hi = box.get<std::vector<double>>("hi", c.domain.hi);
    box.finish();
    const int n = c.domain.dim();
    if (n < 1 || n > 2 || c.domain.hi.size() != c.domain.lo.size()) {
        issues.add("domain.box", "lo and hi must both have 1 or 2 coordinates");
    }
    Block om = d.child("omega");
    c.domain.omega = om.get<std::string>("type", c.domain.omega);
    c.domain.center = om.get<std::vector<double>>("center", std::vector<double>(std::max(n, 1), 0.0));
    c.domain.radius = om.get<double>("radius", c.domain.radius);
    c.domain.omega_lo = om.get<std::vector<double>>("lo", {});
    c.domain.omega_hi = om.get<std::vector<double>>("hi", {});
    c.domain.normal = om.get<std::vector<double>>("normal", {});
    c.domain.offset = om.get<double>("offset", 0.0);
    if (c.domain.omega != "ball" && c.domain.omega != "box" && c.domain.omega != "halfspace") {
        issues.add("domain.omega.type", "expected ball, box or halfspace");
    }
    om.finish();
    c.domain.g = d.get<std::string>("g", c.domain.g);
    check_expression(d, "g", c.domain.g, n);
    d.finish();

    Block gr = top.child("grid");
    c.n_cells = gr.get<int>("n_cells", c.n_cells);
    gr.finish();

    if (top.has("terms")) {
        if (top.has("kernel") || top.has("measure") || top.has("G")) {
            issues.add("terms", "give either terms[...] or kernel/measure/G, not both");
        }
        const json* arr = top.raw("terms");
        c.terms.clear();
        if (!arr->is_array() || arr->empty()) {
            issues.add("terms", "expected a nonempty array");
        } else {
            for (std::size_t i = 0; i < arr->size(); ++i)
                c.terms.push_back(detail::parse_term(Block(&(*arr)[i], "terms[" + std::to_string(i) + "]", issues), n));
        }
    } else {
        TermConfig t;
        t.kernel = detail::parse_kernel(top.child("kernel"), n);
        t.measure = detail::parse_measure(top.child("measure"), t.kernel.dim_m);
        t.G = detail::parse_map(top.child("G"));
        c.terms = {t};
    }

    Block F = top.child("F");
    c.F.gamma = F.get<double>("gamma", c.F.gamma);
    c.F.c = F.get<double>("c", c.F.c);
    c.F.f = F.get<std::string>("f", c.F.f);
    c.F.modulus = F.opt<double>("modulus");
    check_expression(F, "f", c.F.f, n);
    F.finish();

    c.u0 = top.opt<std::string>("u0");
    if (c.u0) check_expression(top, "u0", *c.u0, n);

    Block s = top.child("solver");
    c.solver.tol = s.get<double>("tol", c.solver.tol);
    c.solver.max_iter = s.get<long>("max_iter", c.solver.max_iter);
    c.solver.epsilon = s.opt<double>("epsilon");
    c.solver.z_max = s.opt<double>("z_max");
    c.solver.dt = s.opt<double>("dt");
    s.finish();

    Block ev = top.child("evolution");
    c.evolution.T = ev.get<double>("T", c.evolution.T);
    c.evolution.checkpoints = ev.get<std::vector<double>>("checkpoints", {});
    ev.finish();

    Block mc = top.child("mc");
    c.mc.eps_cut = mc.get<double>("eps_cut", c.mc.eps_cut);
    c.mc.dt_drift = mc.get<double>("dt_drift", c.mc.dt_drift);
    c.mc.n_paths = mc.get<long>("n_paths", c.mc.n_paths);
    c.mc.t_max = mc.opt<double>("t_max");
    c.mc.probes = detail::parse_points(mc, "probes", {std::vector<double>(std::max(n, 1), 0.0)}, n);
    mc.finish();

    Block v = top.child("verify");
    c.verify.u = v.get<std::string>("u", c.verify.u);
    c.verify.v = v.get<std::string>("v", c.verify.v);
    c.verify.tol = v.get<double>("tol", c.verify.tol);
    c.verify.delta = v.get<double>("delta", c.verify.delta);
    for (const char* key : {"u", "v"}) {
        const std::string& text = key[0] == 'u' ? c.verify.u : c.verify.v;
        if (text != "perron_lower" && text != "perron_upper" && text != "solution") check_expression(v, key, text, n);
    }
    v.finish();

    Block st = top.child("study");
    if (const json* cases = st.raw("cases")) {
        c.study.cases.clear();
        if (!cases->is_array()) issues.add("study.cases", "expected an array");
        else
            for (std::size_t i = 0; i < cases->size(); ++i) {
                Block cb(&(*cases)[i], "study.cases[" + std::to_string(i) + "]", issues);
                StudyCase sc;
                sc.name = cb.get<std::string>("name", "case" + std::to_string(i));
                sc.u = cb.get<std::string>("u", "0");
                sc.x = cb.get<std::vector<double>>("x", std::vector<double>(std::max(n, 1), 0.0));
                check_expression(cb, "u", sc.u, n);
                if (static_cast<int>(sc.x.size()) != n) cb.issues().add(cb.where("x"), "wrong dimension");
                cb.finish();
                c.study.cases.push_back(sc);
            }
    } else if (n > 1) {
        c.study.cases.front().x.resize(n, 0.0);
    }
    c.study.eps = st.get<std::vector<double>>("eps", c.study.eps);
    c.study.deltas = st.get<std::vector<double>>("deltas", c.study.deltas);
    c.study.z_max = st.get<double>("z_max", c.study.z_max);
    c.study.nodes_per_shell = st.get<int>("nodes_per_shell", c.study.nodes_per_shell);
    st.finish();

    Block ot = top.child("operator_table");
    c.table.u = ot.get<std::string>("u", c.table.u);
    check_expression(ot, "u", c.table.u, n);
    c.table.points = detail::parse_points(ot, "points", {std::vector<double>(std::max(n, 1), 0.0)}, n);
    ot.finish();

    Block out = top.child("output");
    c.output_dir = out.get<std::string>("dir", c.output_dir);
    out.finish();

    top.finish();
    if (!issues.empty()) issues.raise();
    return c;
}

inline RunConfig parse_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("not valid JSON: ") + e.what());
    }
    return parse(j);
}

inline RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
}

// ---------------------------------------------------------------------------
// Echo

inline json to_json(const RunConfig& c) {
    const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json j;
    json omega{{"type", c.domain.omega}};
    if (c.domain.omega == "ball") {
        omega["center"] = c.domain.center;
        omega["radius"] = c.domain.radius;
    } else if (c.domain.omega == "box") {
        omega["lo"] = c.domain.omega_lo;
        omega["hi"] = c.domain.omega_hi;
    } else {
        omega["normal"] = c.domain.normal;
        omega["offset"] = c.domain.offset;
    }
    j["domain"] = {{"box", {{"lo", c.domain.lo}, {"hi", c.domain.hi}}}, {"omega", omega}, {"g", c.domain.g}};
    j["grid"] = {{"n_cells", c.n_cells}};
    json terms = json::array();
    for (const auto& t : c.terms) {
        const auto& k = t.kernel;
        const auto& m = t.measure;
        json kj{{"variant", k.variant}, {"dim_n", k.dim_n}, {"dim_m", k.dim_m}, {"eps0", k.eps0}, {"axis", k.axis},
                {"constants",
                 {{"B0", k.constants.B0}, {"B1", k.constants.B1}, {"B2", k.constants.B2}, {"B3", k.constants.B3},
                  {"R", k.constants.R}}}};
        json mj{{"family", m.family}, {"alpha0", m.alpha0}, {"dim_m", m.dim_m}, {"mu", opt(m.mu)},
                {"z_max", opt(m.z_max)}, {"epsilon", opt(m.epsilon)}, {"nodes_per_shell", m.nodes_per_shell},
                {"angles_per_shell", m.angles_per_shell}, {"growth_ratio", m.growth_ratio}};
        if (m.family == "tabulated") {
            mj["radii"] = m.radii;
            mj["values"] = m.values;
            mj["tail_exponent"] = m.tail_exponent;
        }
        if (m.family == "density") {
            mj["density"] = m.density;
            mj["support_radius"] = opt(m.support_radius);
        }
        terms.push_back({{"kernel", kj}, {"measure", mj}, {"G", {{"form", t.G.form}, {"kappa", t.G.kappa}}}});
    }
    j["terms"] = terms;
    j["F"] = {{"gamma", c.F.gamma}, {"c", c.F.c}, {"f", c.F.f}, {"modulus", opt(c.F.modulus)}};
    j["u0"] = c.u0 ? json(*c.u0) : json(nullptr);
    j["solver"] = {{"tol", c.solver.tol},       {"max_iter", c.solver.max_iter}, {"epsilon", opt(c.solver.epsilon)},
                   {"z_max", opt(c.solver.z_max)}, {"dt", opt(c.solver.dt)}};
    j["evolution"] = {{"T", c.evolution.T}, {"checkpoints", c.evolution.checkpoints}};
    j["mc"] = {{"eps_cut", c.mc.eps_cut}, {"dt_drift", c.mc.dt_drift}, {"n_paths", c.mc.n_paths},
               {"t_max", opt(c.mc.t_max)}, {"probes", c.mc.probes}};
    j["verify"] = {{"u", c.verify.u}, {"v", c.verify.v}, {"tol", c.verify.tol}, {"delta", c.verify.delta}};
    json cases = json::array();
    for (const auto& sc : c.study.cases) cases.push_back({{"name", sc.name}, {"u", sc.u}, {"x", sc.x}});
    j["study"] = {{"cases", cases},
                  {"eps", c.study.eps},
                  {"deltas", c.study.deltas},
                  {"z_max", c.study.z_max},
                  {"nodes_per_shell", c.study.nodes_per_shell}};
    j["operator_table"] = {{"u", c.table.u}, {"points", c.table.points}};
    j["output"] = {{"dir", c.output_dir}};
    return j;
}

/// 64-bit FNV-1a, used for config and artifact fingerprints.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 15];
    return s;
}

// ---------------------------------------------------------------------------
// Assembly

inline Point to_point(const std::vector<double>& v) {
    Point p(static_cast<int>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) p[static_cast<int>(i)] = v[i];
    return p;
}

inline Domain build_domain(const DomainConfig& d) {
    const int n = d.dim();
    OmegaShape shape = omega::OpenBall{to_point(d.center), d.radius};
    if (d.omega == "box") shape = omega::OpenBox{to_point(d.omega_lo), to_point(d.omega_hi)};
    if (d.omega == "halfspace") shape = omega::HalfSpace{to_point(d.normal), d.offset};
    return Domain(n, to_point(d.lo), to_point(d.hi), shape, ScalarField::from_expression(d.g, n));
}

inline MeasureFamily build_family(const MeasureConfig& m) {
    if (m.family == "tabulated") return TabulatedRadialDensity{m.radii, m.values, m.tail_exponent};
    if (m.family == "density") {
        const ScalarField q = ScalarField::from_expression(m.density, 1);
        return RadialDensity{[q](double s) { return q(Point{s}); },
                             m.support_radius.value_or(std::numeric_limits<double>::infinity()), m.density};
    }
    return PowerLaw{m.alpha0};
}

/// Integrability-gated unless `checked` is false (condition reports only).
inline LevyMeasure build_measure(const MeasureConfig& m, bool checked = true) {
    return checked ? LevyMeasure::create(m.dim_m, build_family(m), m.mu)
                   : LevyMeasure::create_unchecked(m.dim_m, build_family(m), m.mu);
}

inline JumpKernel build_kernel(const KernelConfig& k) {
    KernelVariant v = kernels::Identity{};
    if (k.variant == "radial_scale") v = kernels::RadialScale{};
    if (k.variant == "rotational") v = kernels::Rotational{};
    if (k.variant == "gradient_direction") v = kernels::GradientDirection{k.eps0};
    if (k.variant == "axis") v = kernels::Axis{k.axis};
    return JumpKernel(k.dim_n, k.dim_m, v, k.constants);
}

inline NonlocalScalarMap build_map(const MapConfig& g) {
    if (g.form == "cubic") return NonlocalScalarMap(CubicMonotone{g.kappa});
    return NonlocalScalarMap(IdentityMap{});
}

inline LocalOperator build_local(const LocalConfig& F, int n) {
    return LocalOperator(n, LinearProper{F.gamma, ScalarField::from_expression(F.f, n), F.c});
}

/// epsilon and z_max per term: measure block, then solver block, then h and 1024.
inline ProblemSpec build_problem(const RunConfig& c) {
    auto grid = std::make_shared<const Grid>(build_domain(c.domain), c.n_cells);
    const int n = c.domain.dim();
    std::vector<NonlocalTerm> terms;
    for (const auto& t : c.terms) {
        const auto m = build_measure(t.measure);
        QuadratureOptions q;
        q.nodes_per_shell = t.measure.nodes_per_shell;
        q.angles_per_shell = t.measure.angles_per_shell;
        q.growth_ratio = t.measure.growth_ratio;
        const double eps = t.measure.epsilon.value_or(c.solver.epsilon.value_or(grid->h()));
        const double z_max = t.measure.z_max.value_or(c.solver.z_max.value_or(1024.0));
        terms.push_back({build_map(t.G), build_kernel(t.kernel), m, build_quadrature(m, eps, z_max, q)});
    }
    ProblemSpec spec{grid, build_local(c.F, n), std::move(terms), std::nullopt, 0.0};
    if (c.u0) spec.u0 = ScalarField::from_expression(*c.u0, n);
    spec.horizon = c.evolution.T;
    spec.validate(false);
    return spec;
}

}  // namespace levy::config
