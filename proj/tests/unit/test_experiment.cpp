#include "levyfp/config.hpp"
#include "levyfp/experiment.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace levyfp;

namespace {

std::string env(const char* name)
{
    const char* v = std::getenv(name);
    REQUIRE_MESSAGE(v != nullptr, name << " is not set");
    return v;
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "levyfp_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p)
{
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> fields;
        std::string cur;
        bool quoted = false;
        for (char c : line) {
            if (c == '"') {
                quoted = !quoted;
            } else if (c == ',' && !quoted) {
                fields.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        fields.push_back(cur);
        rows.push_back(fields);
    }
    return rows;
}

struct CliResult {
    int status = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& dir)
{
    const fs::path out = dir / "stdout.txt";
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = env("LEVYFP_CLI") + " " + args + " > " + out.string() + " 2> " + err.string();
    const int raw = std::system(cmd.c_str());
    CliResult r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

std::string config(const std::string& name) { return env("LEVYFP_CONFIGS") + "/" + name; }

}  // namespace

TEST_CASE("OU local evolution writes a nonincreasing l1_norm column")
{
    const fs::path dir = scratch("ou_local");
    RunOptions opt;
    opt.output_dir = dir.string();
    const RunResult res = run_experiment(load_config(config("ou_local.toml")), opt);
    CHECK(res.errors.empty());
    CHECK(res.all_pass());

    const auto rows = read_csv(dir / "evolution.csv");
    REQUIRE(rows.size() == 102);
    CHECK(rows[0] == std::vector<std::string>{"step", "time", "l1_norm", "mass", "min_value", "boundary_mass", "iterations"});
    for (std::size_t k = 2; k < rows.size(); ++k) {
        CHECK(std::stod(rows[k][2]) <= std::stod(rows[k - 1][2]) * (1 + 1e-8));
    }
    CHECK(fs::exists(dir / "summary.csv"));
    CHECK(fs::exists(dir / "density_final.txt"));
}

TEST_CASE("geometric lemma config passes")
{
    const fs::path dir = scratch("lemmas");
    RunOptions opt;
    opt.output_dir = dir.string();
    const RunResult res = run_experiment(load_config(config("geometric_lemmas.toml")), opt);
    CHECK(res.all_pass());
    const auto rows = read_csv(dir / "lemmas.csv");
    REQUIRE(rows.size() > 5);
    CHECK(rows[0][0] == "lemma_id");
    for (std::size_t k = 1; k < rows.size(); ++k) {
        CAPTURE(rows[k][0]);
        CHECK(rows[k][5] == "true");
    }
}

TEST_CASE("summary is a function of the stage reports")
{
    const fs::path dir = scratch("summary");
    RunOptions opt;
    opt.output_dir = dir.string();
    opt.stages = {Stage::lemmas};
    const RunResult res = run_experiment(load_config(config("geometric_lemmas.toml")), opt);
    const auto summary = read_csv(dir / "summary.csv");
    REQUIRE(summary.size() == res.summary.size() + 1);
    for (std::size_t k = 0; k < res.summary.size(); ++k) {
        CHECK(summary[k + 1][0] == "lemmas");
        CHECK(summary[k + 1][4] == (res.summary[k].pass ? "true" : "false"));
    }
    CHECK_FALSE(fs::exists(dir / "validation.csv"));
}

TEST_CASE("CLI: exit codes")
{
    const fs::path dir = scratch("cli");

    SUBCASE("success")
    {
        const CliResult r = run_cli("run " + config("geometric_lemmas.toml") + " --out " + (dir / "ok").string(), dir);
        CHECK(r.status == 0);
        CHECK(r.out.find("PASS lemmas") != std::string::npos);
        CHECK(fs::exists(dir / "ok" / "lemmas.csv"));
    }
    SUBCASE("radius beyond r0")
    {
        std::string text = slurp(config("contraction.toml"));
        text.replace(text.find("r = 0.0625"), 10, "r = 0.2");
        const fs::path cfg = dir / "bad_r.toml";
        std::ofstream(cfg) << text;
        const CliResult r = run_cli("run " + cfg.string() + " --out " + (dir / "bad").string(), dir);
        CHECK(r.status == 2);
        CHECK(r.err.find("1/(8dK)") != std::string::npos);
        CHECK(r.err.find("bad_r.toml:") != std::string::npos);
    }
    SUBCASE("stage failure keeps the reports")
    {
        std::string text = slurp(config("ou_local.toml"));
        text.replace(text.find("mean = [1.0]"), 12, "mean = [7.9]");
        const fs::path cfg = dir / "edge.toml";
        std::ofstream(cfg) << text;
        const CliResult r = run_cli("run " + cfg.string() + " --out " + (dir / "edge").string(), dir);
        CHECK(r.status == 1);
        CHECK(fs::exists(dir / "edge" / "summary.csv"));
        CHECK(fs::exists(dir / "edge" / "assembly.csv"));
        CHECK(slurp(dir / "edge" / "summary.csv").find("false") != std::string::npos);
    }
    SUBCASE("usage errors")
    {
        CHECK(run_cli("run", dir).status == 2);
        CHECK(run_cli("run " + config("ou_local.toml") + " --stage plot", dir).status == 2);
        CHECK(run_cli("run /nonexistent.toml", dir).status == 2);
    }
}

TEST_CASE("CLI: stage override and byte-identical reruns")
{
    const fs::path dir = scratch("rerun");
    for (const char* sub : {"a", "b"}) {
        const CliResult r = run_cli("run " + config("contraction.toml") + " --stage lemmas --stage certify --out " +
                                        (dir / sub).string(),
                                    dir);
        CHECK(r.status == 0);
    }
    CHECK_FALSE(fs::exists(dir / "a" / "validation.csv"));
    CHECK_FALSE(fs::exists(dir / "a" / "evolution.csv"));
    for (const char* f : {"lemmas.csv", "assembly.csv", "certify.csv", "summary.csv"}) {
        CAPTURE(f);
        REQUIRE(fs::exists(dir / "a" / f));
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
}
