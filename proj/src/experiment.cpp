#include "levyfp/experiment.hpp"

#include "levyfp/error.hpp"
#include "levyfp/inverse_flow.hpp"
#include "levyfp/levy_quadrature.hpp"
#include "levyfp/mc_oracle.hpp"
#include "levyfp/rng.hpp"
#include "levyfp/semigroup.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>

namespace levyfp {

bool RunResult::all_pass() const
{
    return errors.empty() && std::all_of(summary.begin(), summary.end(), [](const SummaryRow& r) { return r.pass; });
}

namespace {

namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kJrNormSlack = 1e-10;
constexpr double kJrDualityTol = 1e-12;
constexpr double kJrMarginTol = 1e-10;
constexpr double kPairingTol = 1e-10;
constexpr double kMassTol = 1e-8;
constexpr double kContractionTol = 1e-8;
constexpr double kMassDriftTol = 1e-6;
constexpr double kPositivityTol = 1e-8;

std::string num(double v) { return fmt::format("{:.17g}", v); }
std::string flag(bool b) { return b ? "true" : "false"; }

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

class CsvFile {
public:
    CsvFile(const fs::path& path, const std::vector<std::string>& header) : out_(path, std::ios::binary)
    {
        if (!out_) throw Error(fmt::format("cannot write '{}'", path.string()));
        row(header);
    }

    void row(const std::vector<std::string>& fields)
    {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << csv_field(fields[i]);
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

class Runner {
public:
    Runner(const ExperimentConfig& cfg, fs::path dir)
        : cfg_(cfg), dir_(std::move(dir)), grid_(cfg.model.d, cfg.half_width, cfg.spacing), r_(cfg.split_radius())
    {
    }

    RunResult run(const std::vector<Stage>& stages)
    {
        fs::create_directories(dir_);
        std::map<Stage, bool> ok;
        for (Stage stage : stages) {
            const std::string name(to_string(stage));
            const Stage dep = stage == Stage::mc_compare ? Stage::evolve : Stage::assemble;
            const bool needs_dep = stage == Stage::certify || stage == Stage::evolve || stage == Stage::mc_compare;
            if (needs_dep && ok.count(dep) && !ok[dep]) {
                add(name, fmt::format("skipped: {} failed", to_string(dep)), kNaN, kNaN, false);
                ok[stage] = false;
                continue;
            }
            try {
                switch (stage) {
                case Stage::validate: validate(); break;
                case Stage::lemmas: lemmas(); break;
                case Stage::assemble: assemble(); break;
                case Stage::certify: certify(); break;
                case Stage::evolve: evolve_stage(); break;
                case Stage::mc_compare: mc_compare(); break;
                }
                ok[stage] = true;
            } catch (const Error& e) {
                ok[stage] = false;
                add(name, fmt::format("error: {}", e.what()), kNaN, kNaN, false);
                result_.errors.push_back(fmt::format("{}: {}", name, e.what()));
            }
        }
        write_summary();
        return std::move(result_);
    }

private:
    void add(const std::string& stage, const std::string& item, double value, double threshold, bool pass)
    {
        result_.summary.push_back({stage, item, value, threshold, pass});
    }

    CsvFile open(const std::string& name, const std::vector<std::string>& header)
    {
        result_.files.push_back(name);
        return CsvFile(dir_ / name, header);
    }

    const QuadratureSplit& quadrature()
    {
        if (!quad_) quad_ = split_measure(cfg_.measure, r_, cfg_.n_inner, cfg_.quad_tol);
        return *quad_;
    }

    const AssembledOperators& operators()
    {
        if (!ops_) ops_ = assemble_full(cfg_.model, grid_, r_, quadrature(), cfg_.assembly);
        return *ops_;
    }

    // ---------------------------------------------------------------------

    void validate()
    {
        ValidationOptions opt;
        opt.sample_radius = cfg_.validate.sample_radius;
        opt.jump_radius = cfg_.validate.jump_radius;
        const ValidationReport rep = validate_model(cfg_.model, cfg_.measure, cfg_.validate.n_samples,
                                                    derive_seed(cfg_.seed, "validate"), opt);
        CsvFile csv = open("validation.csv", {"id", "description", "n_checked", "worst_ratio", "witness_x", "witness_z",
                                              "pass", "error"});
        for (const auto& e : rep.entries) {
            csv.row({e.id, e.description, std::to_string(e.n_checked), num(e.worst_ratio), format_point(e.witness_x),
                     format_point(e.witness_z), flag(e.pass), e.error});
            add("validate", e.id, e.worst_ratio, 1.0, e.pass);
        }
    }

    void lemmas()
    {
        const LemmaReport rep = lemma_suite(cfg_.model, r_, cfg_.lemmas.n_samples, cfg_.lemmas.box_radius,
                                            derive_seed(cfg_.seed, "lemmas"));
        CsvFile csv = open("lemmas.csv", {"lemma_id", "n_samples", "worst_ratio", "witness_x", "witness_z", "pass",
                                          "statistic", "limit", "note"});
        for (const auto& e : rep.entries) {
            csv.row({e.lemma_id, std::to_string(e.n_samples), num(e.worst_ratio), format_point(e.witness_x),
                     format_point(e.witness_z), flag(e.pass), num(e.statistic), num(e.limit), e.note});
            add("lemmas", e.lemma_id, e.statistic, e.limit, e.pass);
        }
    }

    // Largest |column sum| over columns whose jump targets all stay a safe
    // distance inside the box.
    double max_interior_column_sum(const SparseOperator& op)
    {
        const QuadratureSplit& q = quadrature();
        const Vec sums = op.column_sums();
        const double h = grid_.spacing();
        double worst = 0.0;
        for (std::size_t l = 0; l < grid_.size(); ++l) {
            double reach = 0.0;
            if (!cfg_.model.jump_free) {
                const Vec x = grid_.node(l);
                for (const auto* nodes : {&q.inner, &q.outer}) {
                    for (const auto& n : *nodes) reach = std::max(reach, eval_jump(cfg_.model, x, n.z).norm());
                }
            }
            if (grid_.boundary_distance(l) < static_cast<int>(std::ceil(reach / h)) + 2) continue;
            worst = std::max(worst, std::abs(sums[static_cast<Eigen::Index>(l)]));
        }
        return worst;
    }

    void assemble()
    {
        const AssembledOperators& ops = operators();
        const QuadratureSplit& q = quadrature();
        CsvFile csv = open("assembly.csv", {"part", "rows", "nnz", "norm_l1", "norm_linf", "max_interior_column_sum"});
        for (const SparseOperator* op : {&ops.A_r, &ops.I_r, &ops.J_r, &ops.A_r_star, &ops.I_r_star, &ops.J_r_star,
                                         &ops.L, &ops.L_star}) {
            csv.row({std::string(to_string(op->part())), std::to_string(op->size()), std::to_string(op->nnz()),
                     num(op->norm_l1()), num(op->norm_linf()), num(max_interior_column_sum(*op))});
            if (cfg_.assemble.dump_coo) {
                const std::string name = fmt::format("{}.coo", to_string(op->part()));
                std::ofstream out(dir_ / name, std::ios::binary);
                op->write_coo(out);
                result_.files.push_back(name);
            }
        }

        const double bound = 2.0 * q.outer_mass + kJrNormSlack;
        const double jl1 = ops.J_r.norm_l1();
        add("assemble", "J_r induced L1 norm <= 2 outer_mass", jl1, bound, jl1 <= bound);
        const double jinf = ops.J_r_star.norm_linf();
        add("assemble", "J_r* induced Linf norm <= 2 outer_mass", jinf, bound, jinf <= bound);

        Engine rng = make_engine(derive_seed(cfg_.seed, "assemble"), 0);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        double worst_gap = 0.0;
        for (int k = 0; k < cfg_.assemble.n_pairs; ++k) {
            GridFunction u(grid_);
            GridFunction f(grid_);
            for (Eigen::Index i = 0; i < u.values.size(); ++i) u.values[i] = unit(rng);
            for (Eigen::Index i = 0; i < f.values.size(); ++i) f.values[i] = unit(rng);
            const Vec ju = ops.J_r.apply(u).values;
            const Vec jf = ops.J_r_star.apply(f).values;
            const double scale = grid_.cell_volume() * ((ju.cwiseProduct(f.values)).lpNorm<1>() +
                                                        (u.values.cwiseProduct(jf)).lpNorm<1>());
            const double gap = duality_gap(ops.J_r, ops.J_r_star, u, f);
            worst_gap = std::max(worst_gap, scale > 0.0 ? gap / scale : gap);
        }
        add("assemble", "J_r duality gap (relative)", worst_gap, kJrDualityTol, worst_gap <= kJrDualityTol);

        const double mass = max_interior_column_sum(ops.L);
        add("assemble", "interior column sums of L", mass, kMassTol, mass <= kMassTol);
    }

    void certify()
    {
        const AssembledOperators& ops = operators();
        CsvFile csv = open("certify.csv", {"operator", "norm", "lambda", "n_functions", "min_margin", "threshold", "pass"});
        const int n = cfg_.certify.n_functions;
        const std::uint64_t base = derive_seed(cfg_.seed, "certify");

        DissipativityOptions local;
        local.c_tol = cfg_.certify.c_tol;
        const SparseOperator ar_ir = levyfp::add({&ops.A_r, &ops.I_r}, OperatorPart::custom);
        for (const auto& rep : dissipativity_check(ar_ir, cfg_.certify.lambdas, n, derive_seed(base, "A_r+I_r"), local)) {
            csv.row({"A_r+I_r", "l1", num(rep.lambda), std::to_string(n), num(rep.min_margin), num(rep.threshold), flag(rep.pass)});
            add("certify", fmt::format("A_r+I_r dissipative (lambda={})", rep.lambda), rep.min_margin, rep.threshold, rep.pass);
        }

        DissipativityOptions exact;
        for (auto rep : dissipativity_check(ops.J_r, cfg_.certify.lambdas, n, derive_seed(base, "J_r"), exact)) {
            rep.threshold = -kJrMarginTol;
            rep.pass = rep.min_margin >= rep.threshold;
            csv.row({"J_r", "l1", num(rep.lambda), std::to_string(n), num(rep.min_margin), num(rep.threshold), flag(rep.pass)});
            add("certify", fmt::format("J_r dissipative (lambda={})", rep.lambda), rep.min_margin, rep.threshold, rep.pass);
        }

        if (cfg_.certify.adjoint_linf) {
            DissipativityOptions linf;
            linf.c_tol = cfg_.certify.c_tol;
            linf.norm = NormKind::linf;
            for (const auto& rep : dissipativity_check(ops.L_star, cfg_.certify.lambdas, n, derive_seed(base, "L*"), linf)) {
                csv.row({"L*", "linf", num(rep.lambda), std::to_string(n), num(rep.min_margin), num(rep.threshold), flag(rep.pass)});
                add("certify", fmt::format("L* dissipative in Linf (lambda={})", rep.lambda), rep.min_margin, rep.threshold, rep.pass);
            }
        }

        double worst = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < n; ++k) {
            Engine rng = make_engine(derive_seed(base, "pairing"), static_cast<std::uint64_t>(k));
            const GridFunction u = random_bump(grid_, rng);
            const double n1 = u.norm_1();
            worst = std::max(worst, duality_set_pairing(ops.J_r, u) / (n1 * n1));
        }
        const bool pass = worst <= kPairingTol;
        csv.row({"J_r duality set", "l1", "", std::to_string(n), num(worst), num(kPairingTol), flag(pass)});
        add("certify", "<J_r u, f_u> / |u|^2", worst, kPairingTol, pass);
    }

    GridFunction initial_density()
    {
        const InitialGaussian& g = cfg_.evolve.u0;
        const double cutoff = g.cutoff * g.std;
        GridFunction u = GridFunction::sample(grid_, [&](const Vec& x) {
            const Vec dx = x - g.mean;
            if (dx.norm() > cutoff) return 0.0;
            return std::exp(-0.5 * dx.squaredNorm() / (g.std * g.std));
        });
        if (!(u.norm_1() > 0.0)) throw Error("evolve: initial Gaussian has no mass on the grid");
        const double reach = max_jump_reach(cfg_.model, quadrature(), u);
        const double h = grid_.spacing();
        const int need = static_cast<int>(std::ceil((2.0 * h + reach) / h - 1e-9));
        require_support_margin(u, need, "evolve: initial density");
        return u;
    }

    void evolve_stage()
    {
        const AssembledOperators& ops = operators();
        GridFunction u0 = initial_density();
        EvolveOptions opt;
        opt.tol = cfg_.evolve.tol;
        const EvolutionReport rep = evolve(ops.L, u0, cfg_.evolve.T, cfg_.evolve.dt, opt);
        final_ = rep.final;

        {
            CsvFile csv = open("evolution.csv", {"step", "time", "l1_norm", "mass", "min_value", "boundary_mass", "iterations"});
            for (std::size_t n = 0; n < rep.times.size(); ++n) {
                csv.row({std::to_string(n), num(rep.times[n]), num(rep.l1_norms[n]), num(rep.masses[n]),
                         num(rep.min_values[n]), num(rep.boundary_mass[n]), std::to_string(rep.iterations[n])});
            }
        }
        {
            std::ofstream out(dir_ / "density_final.txt", std::ios::binary);
            for (std::size_t i = 0; i < grid_.size(); ++i) {
                const Vec x = grid_.node(i);
                for (Eigen::Index k = 0; k < x.size(); ++k) fmt::print(out, "{:.17g} ", x[k]);
                fmt::print(out, "{:.17g}\n", rep.final.values[static_cast<Eigen::Index>(i)]);
            }
            result_.files.push_back("density_final.txt");
        }

        double growth = -std::numeric_limits<double>::infinity();
        double drift = 0.0;
        double lowest = std::numeric_limits<double>::infinity();
        for (std::size_t n = 1; n < rep.times.size(); ++n) {
            growth = std::max(growth, rep.l1_norms[n] / rep.l1_norms[n - 1] - 1.0);
            drift = std::max(drift, std::abs(rep.masses[n] - rep.masses[0]));
            lowest = std::min(lowest, rep.min_values[n]);
        }
        const double u0_inf = u0.norm_inf() / u0.norm_1();
        add("evolve", "max relative L1 growth per step", growth, kContractionTol, growth <= kContractionTol);
        add("evolve", "mass drift", drift, kMassDriftTol, drift <= kMassDriftTol);
        add("evolve", "min value / |u0|_inf", lowest / u0_inf, -kPositivityTol, lowest >= -kPositivityTol * u0_inf);
    }

    void mc_compare()
    {
        if (!final_) throw Error("mc_compare: no evolved density available");
        const InitialGaussian& g = cfg_.evolve.u0;
        const InitialSampler x0 = [&g](Engine& rng) {
            std::normal_distribution<double> normal(0.0, 1.0);
            Vec x(g.mean.size());
            do {
                for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = normal(rng);
            } while (x.norm() > g.cutoff);
            return Vec(g.mean + g.std * x);
        };
        McConfig mc;
        mc.n_paths = cfg_.mc.n_paths;
        mc.n_steps = cfg_.mc.n_steps;
        mc.T = cfg_.evolve.T;
        mc.epsilon = cfg_.mc.epsilon;
        mc.seed = derive_seed(cfg_.seed, "mc");
        mc.antithetic = cfg_.mc.antithetic;
        const SampleSet samples = simulate(cfg_.model, cfg_.measure, x0, mc);
        if (cfg_.mc.write_samples) {
            std::ofstream out(dir_ / "samples.txt", std::ios::binary);
            write_samples(out, samples);
            result_.files.push_back("samples.txt");
        }
        const GridFunction kde = kde_density(samples, grid_, cfg_.mc.bandwidth);
        const double dist = l1_distance(kde, *final_);
        const bool pass = dist <= cfg_.mc.l1_threshold;
        CsvFile csv = open("mc_compare.csv", {"n_paths", "n_flagged", "jump_rate", "dropped_moment", "epsilon",
                                              "bandwidth", "l1_distance", "threshold", "pass"});
        csv.row({std::to_string(cfg_.mc.n_paths), std::to_string(samples.n_flagged), num(samples.jump_rate),
                 num(samples.dropped_moment), num(cfg_.mc.epsilon),
                 cfg_.mc.bandwidth ? num(*cfg_.mc.bandwidth) : std::string("auto"), num(dist),
                 num(cfg_.mc.l1_threshold), flag(pass)});
        add("mc_compare", "L1(KDE, PDE)", dist, cfg_.mc.l1_threshold, pass);
    }

    void write_summary()
    {
        CsvFile csv = open("summary.csv", {"stage", "item", "value", "threshold", "pass"});
        for (const auto& r : result_.summary) csv.row({r.stage, r.item, num(r.value), num(r.threshold), flag(r.pass)});
    }

    const ExperimentConfig& cfg_;
    fs::path dir_;
    Grid grid_;
    double r_;
    std::optional<QuadratureSplit> quad_;
    std::optional<AssembledOperators> ops_;
    std::optional<GridFunction> final_;
    RunResult result_;
};

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options)
{
    const fs::path dir = options.output_dir ? *options.output_dir : config.output_dir;
    const std::vector<Stage> stages = resolve_stages(options.stages.empty() ? config.run : options.stages);
    Runner runner(config, dir);
    return runner.run(stages);
}

int run_command(const std::string& config_path, const RunOptions& options)
{
    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path);
    } catch (const ConfigError& e) {
        if (e.line() > 0) {
            fmt::print(std::cerr, "{}:{}: config error: {}\n", config_path, e.line(), e.what());
        } else {
            fmt::print(std::cerr, "{}: config error: {}\n", config_path, e.what());
        }
        return 2;
    } catch (const Error& e) {
        fmt::print(std::cerr, "{}: config error: {}\n", config_path, e.what());
        return 2;
    }

    RunResult res;
    try {
        res = run_experiment(cfg, options);
    } catch (const std::exception& e) {
        fmt::print(std::cerr, "error: {}\n", e.what());
        return 1;
    }
    for (const auto& row : res.summary) {
        fmt::print("{:<4} {:<11} {}  value={:.6g} threshold={:.6g}\n", row.pass ? "PASS" : "FAIL", row.stage, row.item,
                   row.value, row.threshold);
    }
    for (const auto& e : res.errors) fmt::print(std::cerr, "stage failed: {}\n", e);
    return res.all_pass() ? 0 : 1;
}

}  // namespace levyfp
