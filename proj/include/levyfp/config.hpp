#pragma once

#include "levyfp/levy_measure.hpp"
#include "levyfp/model.hpp"
#include "levyfp/operators.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace levyfp {

inline constexpr const char* kSchemaVersion = "levyfp/1";

enum class Stage { validate, lemmas, assemble, certify, evolve, mc_compare };

std::string_view to_string(Stage stage);
std::optional<Stage> parse_stage(std::string_view name);
/// Adds the stages `requested` depends on and sorts into execution order.
std::vector<Stage> resolve_stages(const std::vector<Stage>& requested);

struct ValidateSettings {
    int n_samples = 1000;
    double sample_radius = 10.0;
    double jump_radius = 1.0;
};

struct LemmaSettings {
    int n_samples = 10000;
    double box_radius = 10.0;
};

struct AssembleSettings {
    bool dump_coo = false;
    int n_pairs = 20;  // random (u, f) pairs for the J_r duality check
};

struct CertifySettings {
    std::vector<double> lambdas{0.1, 1.0, 10.0};
    int n_functions = 100;
    double c_tol = 10.0;
    bool adjoint_linf = true;  // also test |(lambda - L*) f|_inf >= lambda |f|_inf - eps_h
};

struct InitialGaussian {
    Vec mean;           // default: origin
    double std = 0.1;
    double cutoff = 6.0;  // truncated at cutoff * std from the mean
};

struct EvolveSettings {
    double T = 1.0;
    double dt = 0.01;
    double tol = 1e-12;
    InitialGaussian u0;
};

struct McSettings {
    int n_paths = 10000;
    int n_steps = 100;
    double epsilon = 1e-3;
    bool antithetic = false;
    std::optional<double> bandwidth;  // empty: Silverman
    double l1_threshold = 0.1;
    bool write_samples = false;
};

struct ExperimentConfig {
    std::string source;  // path the config was read from
    SdeModel model;
    LevyMeasure measure;
    double half_width = 8.0;
    double spacing = 0.01;
    std::optional<double> r;  // empty: r0 / 2
    int n_inner = 20;
    double quad_tol = 1e-8;
    AssemblyOptions assembly;
    std::vector<Stage> run;
    std::uint64_t seed = 0;
    ValidateSettings validate;
    LemmaSettings lemmas;
    AssembleSettings assemble;
    CertifySettings certify;
    EvolveSettings evolve;
    McSettings mc;
    std::string output_dir = "out";

    /// Explicit r, or r0 / 2 with r0 = 1/(8dK).
    double split_radius() const;
};

/// Parses and checks an experiment config. Throws ConfigError with the line
/// of the offending key (0 when the problem is not tied to one line).
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<string>");
ExperimentConfig load_config(const std::string& path);

}  // namespace levyfp
