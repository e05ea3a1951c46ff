#include "levyfp/config.hpp"

#include "levyfp/error.hpp"
#include "levyfp/inverse_flow.hpp"

#include <fmt/format.h>
#include <toml.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace levyfp {

std::string_view to_string(Stage stage)
{
    switch (stage) {
    case Stage::validate: return "validate";
    case Stage::lemmas: return "lemmas";
    case Stage::assemble: return "assemble";
    case Stage::certify: return "certify";
    case Stage::evolve: return "evolve";
    case Stage::mc_compare: return "mc_compare";
    }
    return "?";
}

std::optional<Stage> parse_stage(std::string_view name)
{
    for (Stage s : {Stage::validate, Stage::lemmas, Stage::assemble, Stage::certify, Stage::evolve, Stage::mc_compare}) {
        if (to_string(s) == name) return s;
    }
    return std::nullopt;
}

std::vector<Stage> resolve_stages(const std::vector<Stage>& requested)
{
    std::set<Stage> all(requested.begin(), requested.end());
    if (all.count(Stage::mc_compare)) all.insert(Stage::evolve);
    if (all.count(Stage::certify) || all.count(Stage::evolve)) all.insert(Stage::assemble);
    return {all.begin(), all.end()};
}

double ExperimentConfig::split_radius() const
{
    return r ? *r : 0.5 * admissible_radius(model);
}

namespace {

int line_of(const toml::node& n) { return static_cast<int>(n.source().begin.line); }

// Table accessor that remembers which keys were read, so leftovers can be
// reported as unknown.
class Section {
public:
    Section(const toml::table& table, std::string path) : table_(table), path_(std::move(path)) {}

    const std::string& path() const { return path_; }
    int line() const { return line_of(table_); }
    bool has(const std::string& key) const { return table_.contains(key); }

    const toml::node* node(const std::string& key)
    {
        used_.insert(key);
        return table_.get(key);
    }

    int line(const std::string& key) const
    {
        const toml::node* n = table_.get(key);
        return n ? line_of(*n) : line();
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const
    {
        throw ConfigError(fmt::format("{}: {}", qualified(key), what), line(key));
    }

    std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt)
    {
        const toml::node* n = node(key);
        if (!n) return require(key, fallback);
        return as_number(*n, qualified(key));
    }

    double positive(const std::string& key, std::optional<double> fallback = std::nullopt)
    {
        const double v = number(key, fallback);
        if (!(v > 0.0) || !std::isfinite(v)) fail(key, fmt::format("must be a positive finite number, got {}", v));
        return v;
    }

    std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt)
    {
        const toml::node* n = node(key);
        if (!n) return require(key, fallback);
        if (!n->is_integer()) fail(key, "expected an integer");
        return n->as_integer()->get();
    }

    int count(const std::string& key, int fallback, int min = 1)
    {
        const std::int64_t v = integer(key, fallback);
        if (v < min || v > std::numeric_limits<int>::max()) fail(key, fmt::format("must be an integer >= {}", min));
        return static_cast<int>(v);
    }

    bool boolean(const std::string& key, bool fallback)
    {
        const toml::node* n = node(key);
        if (!n) return fallback;
        if (!n->is_boolean()) fail(key, "expected true or false");
        return n->as_boolean()->get();
    }

    std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt)
    {
        const toml::node* n = node(key);
        if (!n) return require(key, fallback);
        if (!n->is_string()) fail(key, "expected a string");
        return n->as_string()->get();
    }

    const toml::array* array(const std::string& key, bool required = false)
    {
        const toml::node* n = node(key);
        if (!n) {
            if (required) fail(key, "missing required key");
            return nullptr;
        }
        if (!n->is_array()) fail(key, "expected an array");
        return n->as_array();
    }

    std::optional<Section> table(const std::string& key, bool required = false)
    {
        const toml::node* n = node(key);
        if (!n) {
            if (required) throw ConfigError(fmt::format("missing required table [{}]", qualified(key)), line());
            return std::nullopt;
        }
        if (!n->is_table()) fail(key, "expected a table");
        return Section(*n->as_table(), qualified(key));
    }

    /// Rejects keys that were never read.
    void finish() const
    {
        for (auto&& [k, v] : table_) {
            const std::string key(k.str());
            if (!used_.count(key)) {
                throw ConfigError(fmt::format("unknown key '{}'", qualified(key)), line_of(v));
            }
        }
    }

    static double as_number(const toml::node& n, const std::string& what)
    {
        if (n.is_floating_point()) return n.as_floating_point()->get();
        if (n.is_integer()) return static_cast<double>(n.as_integer()->get());
        throw ConfigError(fmt::format("{}: expected a number", what), line_of(n));
    }

private:
    template <class T>
    T require(const std::string& key, const std::optional<T>& fallback) const
    {
        if (!fallback) throw ConfigError(fmt::format("missing required key '{}'", qualified(key)), line());
        return *fallback;
    }

    const toml::table& table_;
    std::string path_;
    std::set<std::string> used_;
};

Vec number_vector(const toml::array& arr, const std::string& what, int expected)
{
    if (expected >= 0 && static_cast<int>(arr.size()) != expected) {
        throw ConfigError(fmt::format("{}: expected {} entries, got {}", what, expected, arr.size()), line_of(arr));
    }
    Vec v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = Section::as_number(arr[i], what);
    return v;
}

Mat number_matrix(const toml::array& arr, const std::string& what, int rows, int cols)
{
    if (static_cast<int>(arr.size()) != rows) {
        throw ConfigError(fmt::format("{}: expected {} rows, got {}", what, rows, arr.size()), line_of(arr));
    }
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        const toml::node& row = arr[static_cast<std::size_t>(i)];
        if (!row.is_array()) throw ConfigError(fmt::format("{}: row {} is not an array", what, i), line_of(row));
        m.row(i) = number_vector(*row.as_array(), what, cols).transpose();
    }
    return m;
}

// [{coef = 1.0, pow = [1, 0]}, ...]
Polynomial parse_polynomial(const toml::node& node, int n_vars, const std::string& what)
{
    if (!node.is_array()) throw ConfigError(fmt::format("{}: a polynomial is an array of terms", what), line_of(node));
    std::vector<Polynomial::Term> terms;
    for (const toml::node& tn : *node.as_array()) {
        if (!tn.is_table()) throw ConfigError(fmt::format("{}: terms are {{coef, pow}} tables", what), line_of(tn));
        Section term(*tn.as_table(), what);
        Polynomial::Term t;
        t.coef = term.number("coef");
        const toml::array* pow = term.array("pow", true);
        if (static_cast<int>(pow->size()) != n_vars) {
            throw ConfigError(fmt::format("{}: pow needs {} exponents, got {}", what, n_vars, pow->size()), line_of(*pow));
        }
        for (const toml::node& e : *pow) {
            if (!e.is_integer() || e.as_integer()->get() < 0) {
                throw ConfigError(fmt::format("{}: exponents must be nonnegative integers", what), line_of(e));
            }
            t.pow.push_back(static_cast<int>(e.as_integer()->get()));
        }
        term.finish();
        terms.push_back(std::move(t));
    }
    return Polynomial(n_vars, std::move(terms));
}

std::vector<Polynomial> parse_polynomials(Section& s, const std::string& key, int count, int n_vars)
{
    const toml::array* arr = s.array(key, true);
    if (static_cast<int>(arr->size()) != count) {
        s.fail(key, fmt::format("expected {} polynomials, got {}", count, arr->size()));
    }
    std::vector<Polynomial> out;
    for (std::size_t i = 0; i < arr->size(); ++i) {
        out.push_back(parse_polynomial((*arr)[i], n_vars, fmt::format("{}[{}]", s.qualified(key), i)));
    }
    return out;
}

void parse_model(Section& sec, ExperimentConfig& cfg)
{
    SdeModel& m = cfg.model;
    m.name = "config";
    const std::int64_t dim = sec.integer("dim");
    if (dim < 1 || dim > 3) sec.fail("dim", "must be 1, 2 or 3");
    m.d = static_cast<int>(dim);
    const int d = m.d;
    m.K = sec.positive("K");
    m.alpha = sec.positive("alpha", 1.0);
    m.noise_dim = sec.count("noise_dim", d);

    {
        auto drift = sec.table("drift", true);
        const std::string kind = drift->string("kind");
        if (kind == "ou") {
            m.b = ou_drift(d, drift->number("theta", 1.0));
        } else if (kind == "constant") {
            m.b = constant_drift(number_vector(*drift->array("value", true), drift->qualified("value"), d));
        } else if (kind == "linear") {
            const Mat a = number_matrix(*drift->array("matrix", true), drift->qualified("matrix"), d, d);
            const toml::array* off = drift->array("offset");
            m.b = linear_drift(a, off ? number_vector(*off, drift->qualified("offset"), d) : Vec::Zero(d));
        } else if (kind == "polynomial") {
            m.b = polynomial_drift(parse_polynomials(*drift, "components", d, d));
        } else {
            drift->fail("kind", fmt::format("unknown drift kind '{}' (ou, constant, linear, polynomial)", kind));
        }
        drift->finish();
    }
    {
        auto diff = sec.table("diffusion", true);
        const std::string kind = diff->string("kind");
        if (kind == "constant") {
            const toml::node* s = diff->node("sigma");
            if (!s) diff->fail("sigma", "missing required key");
            if (s->is_array()) {
                m.sigma = constant_diffusion(number_matrix(*s->as_array(), diff->qualified("sigma"), d, m.noise_dim));
            } else {
                if (m.noise_dim != d) diff->fail("sigma", "a scalar sigma needs noise_dim = dim");
                m.sigma = constant_diffusion(Section::as_number(*s, diff->qualified("sigma")) * Mat::Identity(d, d));
            }
        } else if (kind == "polynomial") {
            m.sigma = polynomial_diffusion(d, m.noise_dim, parse_polynomials(*diff, "entries", d * m.noise_dim, d));
        } else {
            diff->fail("kind", fmt::format("unknown diffusion kind '{}' (constant, polynomial)", kind));
        }
        diff->finish();
    }
    {
        auto jump = sec.table("jump", true);
        const std::string kind = jump->string("kind");
        JumpMap map;
        static const std::vector<std::pair<std::string, JumpKind>> builtins{
            {"none", JumpKind::none},   {"additive", JumpKind::additive},   {"geometric", JumpKind::geometric},
            {"sine", JumpKind::sine},   {"quadratic", JumpKind::quadratic}, {"cross", JumpKind::cross}};
        const auto it = std::find_if(builtins.begin(), builtins.end(), [&](const auto& b) { return b.first == kind; });
        try {
            if (it != builtins.end()) {
                map = builtin_jump(it->second, d);
            } else if (kind == "polynomial") {
                map = polynomial_jump(d, parse_polynomials(*jump, "components", d, 2 * d));
            } else {
                jump->fail("kind", fmt::format(
                                       "unknown jump kind '{}' (none, additive, geometric, sine, quadratic, cross, polynomial)", kind));
            }
        } catch (const PreconditionError& e) {
            jump->fail("kind", e.what());
        }
        m.p = std::move(map.p);
        m.dp_dy = std::move(map.dp_dy);
        m.jump_free = map.jump_free;
        jump->finish();
    }
    sec.finish();
}

void parse_measure(Section& sec, ExperimentConfig& cfg)
{
    LevyMeasure& nu = cfg.measure;
    nu.d = cfg.model.d;
    const std::string kind = sec.string("kind");
    const bool want_atoms = kind == "atoms" || kind == "mixed";
    const bool want_density = kind == "stable_density" || kind == "mixed";
    if (!want_atoms && !want_density && kind != "none") {
        sec.fail("kind", fmt::format("unknown measure kind '{}' (none, atoms, stable_density, mixed)", kind));
    }
    nu.s = sec.positive("s", 1.0);
    if (want_atoms) {
        const toml::array* atoms = sec.array("atoms", true);
        for (const toml::node& a : *atoms) {
            if (!a.is_table()) throw ConfigError(fmt::format("{}: atoms are {{z, w}} tables", sec.qualified("atoms")), line_of(a));
            Section at(*a.as_table(), sec.qualified("atoms"));
            Atom atom;
            const toml::node* z = at.node("z");
            if (!z) at.fail("z", "missing required key");
            if (z->is_array()) {
                atom.z = number_vector(*z->as_array(), at.qualified("z"), nu.d);
            } else {
                if (nu.d != 1) at.fail("z", "a scalar z needs dim = 1");
                atom.z = Vec::Constant(1, Section::as_number(*z, at.qualified("z")));
            }
            if (atom.z.norm() == 0.0) at.fail("z", "atoms may not sit at the origin");
            atom.w = at.positive("w");
            at.finish();
            nu.atoms.push_back(std::move(atom));
        }
    }
    if (want_density) {
        auto ds = sec.table("density", true);
        PowerDensity pd;
        pd.c = ds->positive("c", 1.0);
        pd.beta = ds->number("beta");
        if (!(pd.beta > 0.0 && pd.beta < 2.0)) ds->fail("beta", "must lie in (0, 2)");
        pd.z_max = ds->has("z_max") ? ds->positive("z_max") : std::numeric_limits<double>::infinity();
        const std::string sided = ds->string("sided", std::string("two"));
        if (sided == "one") {
            if (nu.d != 1) ds->fail("sided", "one-sided densities need dim = 1");
            pd.sided = Sidedness::one_sided;
        } else if (sided != "two") {
            ds->fail("sided", "must be \"one\" or \"two\"");
        }
        pd.n_angles = ds->count("n_angles", 8);
        ds->finish();
        if (nu.d > 2) sec.fail("density", "power densities are supported for dim <= 2");
        nu.density = pd;
    }
    sec.finish();
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source)
{
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        throw ConfigError(fmt::format("TOML syntax error: {}", e.description()), static_cast<int>(e.source().begin.line));
    }

    ExperimentConfig cfg;
    cfg.source = source;
    Section top(root, "");
    const std::string schema = top.string("schema");
    if (schema != kSchemaVersion) top.fail("schema", fmt::format("unsupported schema '{}', expected '{}'", schema, kSchemaVersion));

    {
        auto model = top.table("model", true);
        parse_model(*model, cfg);
    }
    {
        auto measure = top.table("measure");
        if (measure) {
            parse_measure(*measure, cfg);
        } else {
            cfg.measure.d = cfg.model.d;
        }
    }
    {
        auto grid = top.table("grid", true);
        cfg.half_width = grid->positive("half_width");
        cfg.spacing = grid->positive("spacing");
        const double cells = 2.0 * cfg.half_width / cfg.spacing;
        if (std::abs(cells - std::round(cells)) > 1e-9 * cells) grid->fail("spacing", "must divide 2 * half_width");
        grid->finish();
    }
    const double r0 = admissible_radius(cfg.model);
    {
        auto op = top.table("operator");
        if (op) {
            const toml::node* rn = op->node("r");
            if (rn && !(rn->is_string() && rn->as_string()->get() == "auto")) {
                const double r = Section::as_number(*rn, op->qualified("r"));
                if (!(r > 0.0)) op->fail("r", "must be positive or \"auto\"");
                if (!(r < r0)) {
                    op->fail("r", fmt::format("r = {} must be below r0 = 1/(8dK) = 1/(8*{}*{}) = {}", r, cfg.model.d,
                                              cfg.model.K, r0));
                }
                cfg.r = r;
            }
            cfg.n_inner = op->count("n_inner", cfg.n_inner, 0);
            cfg.quad_tol = op->positive("tol", cfg.quad_tol);
            const std::string remap = op->string("remap", std::string("conservative"));
            if (remap == "interpolate") {
                cfg.assembly.remap = RemapScheme::interpolate;
            } else if (remap != "conservative") {
                op->fail("remap", "must be \"conservative\" or \"interpolate\"");
            }
            if (cfg.assembly.remap == RemapScheme::conservative && cfg.model.d > 2) {
                op->fail("remap", "the conservative remap needs dim <= 2; use remap = \"interpolate\"");
            }
            op->finish();
        } else if (cfg.model.d > 2) {
            cfg.assembly.remap = RemapScheme::interpolate;
        }
    }

    {
        const toml::array* run = top.array("run", true);
        for (const toml::node& n : *run) {
            if (!n.is_string()) throw ConfigError("run: entries must be stage names", line_of(n));
            const auto stage = parse_stage(n.as_string()->get());
            if (!stage) {
                throw ConfigError(fmt::format("run: unknown stage '{}' (validate, lemmas, assemble, certify, evolve, mc_compare)",
                                              n.as_string()->get()),
                                  line_of(n));
            }
            cfg.run.push_back(*stage);
        }
    }
    {
        const std::int64_t seed = top.integer("seed", 0);
        if (seed < 0) top.fail("seed", "must be nonnegative");
        cfg.seed = static_cast<std::uint64_t>(seed);
    }

    if (auto s = top.table("validate")) {
        cfg.validate.n_samples = s->count("n_samples", cfg.validate.n_samples);
        cfg.validate.sample_radius = s->positive("sample_radius", cfg.validate.sample_radius);
        cfg.validate.jump_radius = s->positive("jump_radius", cfg.validate.jump_radius);
        s->finish();
    }
    if (auto s = top.table("lemmas")) {
        cfg.lemmas.n_samples = s->count("n_samples", cfg.lemmas.n_samples);
        cfg.lemmas.box_radius = s->positive("box_radius", cfg.lemmas.box_radius);
        s->finish();
    }
    if (auto s = top.table("assemble")) {
        cfg.assemble.dump_coo = s->boolean("dump_coo", cfg.assemble.dump_coo);
        cfg.assemble.n_pairs = s->count("n_pairs", cfg.assemble.n_pairs);
        s->finish();
    }
    if (auto s = top.table("certify")) {
        if (const toml::array* l = s->array("lambdas")) {
            const Vec v = number_vector(*l, s->qualified("lambdas"), -1);
            if (v.size() == 0 || (v.array() <= 0.0).any()) s->fail("lambdas", "need at least one lambda, all positive");
            cfg.certify.lambdas.assign(v.data(), v.data() + v.size());
        }
        cfg.certify.n_functions = s->count("n_functions", cfg.certify.n_functions);
        cfg.certify.c_tol = s->positive("c_tol", cfg.certify.c_tol);
        cfg.certify.adjoint_linf = s->boolean("adjoint_linf", cfg.certify.adjoint_linf);
        s->finish();
    }
    cfg.evolve.u0.mean = Vec::Zero(cfg.model.d);
    if (auto s = top.table("evolve")) {
        cfg.evolve.T = s->positive("T", cfg.evolve.T);
        cfg.evolve.dt = s->positive("dt", cfg.evolve.dt);
        cfg.evolve.tol = s->positive("tol", cfg.evolve.tol);
        if (auto u0 = s->table("u0")) {
            const std::string kind = u0->string("kind", std::string("gaussian"));
            if (kind != "gaussian") u0->fail("kind", "only \"gaussian\" initial data is supported");
            if (const toml::array* mean = u0->array("mean")) {
                cfg.evolve.u0.mean = number_vector(*mean, u0->qualified("mean"), cfg.model.d);
            }
            cfg.evolve.u0.std = u0->positive("std", cfg.evolve.u0.std);
            cfg.evolve.u0.cutoff = u0->positive("cutoff", cfg.evolve.u0.cutoff);
            u0->finish();
        }
        s->finish();
    }
    if (auto s = top.table("mc")) {
        cfg.mc.n_paths = s->count("n_paths", cfg.mc.n_paths);
        cfg.mc.n_steps = s->count("n_steps", cfg.mc.n_steps);
        cfg.mc.epsilon = s->positive("epsilon", cfg.mc.epsilon);
        cfg.mc.antithetic = s->boolean("antithetic", cfg.mc.antithetic);
        if (const toml::node* bw = s->node("bandwidth")) {
            if (!(bw->is_string() && bw->as_string()->get() == "auto")) {
                const double v = Section::as_number(*bw, s->qualified("bandwidth"));
                if (!(v > 0.0)) s->fail("bandwidth", "must be positive or \"auto\"");
                cfg.mc.bandwidth = v;
            }
        }
        cfg.mc.l1_threshold = s->positive("l1_threshold", cfg.mc.l1_threshold);
        cfg.mc.write_samples = s->boolean("write_samples", cfg.mc.write_samples);
        if (cfg.mc.epsilon > cfg.split_radius()) {
            s->fail("epsilon", fmt::format("must not exceed the split radius r = {}", cfg.split_radius()));
        }
        s->finish();
    }
    if (auto s = top.table("output")) {
        cfg.output_dir = s->string("dir", cfg.output_dir);
        s->finish();
    }
    top.finish();
    return cfg;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path));
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

}  // namespace levyfp
