#include <doctest.h>

#include "mml/driver.hpp"

#include "support.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <sstream>

using namespace mml;
namespace fs = std::filesystem;

namespace {

const char* kModel = "k1: 1; k2: 0.5;\n"
                     "BoundingPlanes : Box{lower:[0,0,0], upper:[6,6,6]};\n"
                     "type P : particle { radius: 0.5; A: conc(1.0); B: conc(0.0);\n"
                     "  proc (A) -> (B) {k1*A}; proc (B) -> (A) {k2*B}; };\n"
                     "type Q : particle { radius: 0.5; };\n"
                     "p1 : P(1,1,1,velocity=[0.5,0,0]); p2 : P(4,4,4);\n"
                     "proc (x:P) -> (Q) when (x.B > 0.3) {0.2};\n";

fs::path write_model(const fs::path& dir, const std::string& name, const std::string& text)
{
    const fs::path p = dir / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
}

struct Outcome {
    int code;
    std::string out, err;
};

Outcome run(RunConfig cfg)
{
    std::ostringstream out, err;
    const int code = run_simulation(cfg, out, err);
    return {code, out.str(), err.str()};
}

std::size_t line_count(const fs::path& p)
{
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);)
        ++n;
    return n;
}

bool has_partial_files(const fs::path& dir)
{
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.path().extension() == ".part")
            return true;
    return false;
}

int shell(const std::string& args)
{
    const int status = std::system((std::string(MML_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("stride controls the number of samples")
{
    const auto dir = test::scratch("stride");
    const auto model = write_model(dir, "m.mml", kModel);
    for (const auto& [steps, stride, samples] :
         std::vector<std::tuple<int, int, std::size_t>>{{100, 10, 11}, {100, 7, 16}, {5, 1, 6}, {0, 3, 1}}) {
        RunConfig cfg;
        cfg.paths = {model.string()};
        cfg.steps = static_cast<std::uint64_t>(steps);
        cfg.stride = static_cast<std::uint64_t>(stride);
        cfg.out = (dir / "o").string();
        const auto r = run(cfg);
        REQUIRE(r.code == kExitOk);
        CHECK(line_count(dir / "o" / "species.csv") == samples + 1);
        CHECK(line_count(dir / "o" / "particles.jsonl") == samples);
        CHECK(r.out.find("wrote " + std::to_string(samples) + " samples") != std::string::npos);
        CHECK_FALSE(has_partial_files(dir));
    }
}

TEST_CASE("species table header and formats")
{
    const auto dir = test::scratch("formats");
    const auto model = write_model(dir, "m.mml", kModel);
    RunConfig cfg;
    cfg.paths = {model.string()};
    cfg.steps = 3;
    cfg.out = (dir / "csv").string();
    REQUIRE(run(cfg).code == kExitOk);
    std::ifstream csv(dir / "csv" / "species.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "time,step,count(P),sum(P.A),sum(P.B),count(Q),links");

    cfg.format = "json";
    cfg.particles = false;
    cfg.out = (dir / "json").string();
    REQUIRE(run(cfg).code == kExitOk);
    CHECK_FALSE(fs::exists(dir / "json" / "particles.jsonl"));
    std::ifstream js(dir / "json" / "species.jsonl");
    std::string first;
    std::getline(js, first);
    const auto row = nlohmann::json::parse(first);
    CHECK(row["time"] == 0.0);
    CHECK(row["count(P)"] == 2.0);
}

TEST_CASE("same seed reproduces the run byte for byte")
{
    const auto dir = test::scratch("determinism");
    const auto model = write_model(dir, "m.mml", kModel);
    auto once = [&](const std::string& name, std::uint64_t seed) {
        RunConfig cfg;
        cfg.paths = {model.string()};
        cfg.steps = 200;
        cfg.seed = seed;
        cfg.out = (dir / name).string();
        REQUIRE(run(cfg).code == kExitOk);
        return test::read_text(dir / name / "species.csv") + test::read_text(dir / name / "particles.jsonl");
    };
    const auto a = once("a", 3), b = once("b", 3), c = once("c", 4);
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("resumed run matches an uninterrupted one")
{
    const auto dir = test::scratch("resume");
    const auto model = write_model(dir, "m.mml", kModel);
    RunConfig full;
    full.paths = {model.string()};
    full.steps = 120;
    full.stride = 120;
    full.out = (dir / "full").string();
    REQUIRE(run(full).code == kExitOk);

    RunConfig first = full;
    first.steps = 50;
    first.stride = 50;
    first.out = (dir / "first").string();
    REQUIRE(run(first).code == kExitOk);
    RunConfig second = full;
    second.steps = 70;
    second.stride = 70;
    second.resume = (dir / "first" / "checkpoint.json").string();
    second.out = (dir / "second").string();
    REQUIRE(run(second).code == kExitOk);

    CHECK(test::read_text(dir / "full" / "checkpoint.json") == test::read_text(dir / "second" / "checkpoint.json"));
}

TEST_CASE("parameter overrides reach the model")
{
    const auto dir = test::scratch("overrides");
    const auto model = write_model(dir, "m.mml", "k: 1; type P : particle { radius: 0.5; A: amount(1.0); proc (A) -> () {k*A}; };"
                                                 "p : P(0,0,0);");
    RunConfig cfg;
    cfg.paths = {model.string()};
    cfg.steps = 100;
    cfg.stride = 100;
    cfg.dt = 0.01;
    cfg.overrides = {{"k", 2.0}};
    cfg.out = (dir / "o").string();
    REQUIRE(run(cfg).code == kExitOk);
    std::ifstream csv(dir / "o" / "species.csv");
    std::string line;
    std::getline(csv, line);
    std::getline(csv, line);
    std::getline(csv, line);
    std::stringstream row(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(row, cell, ','))
        v.push_back(std::stod(cell));
    REQUIRE(v.size() == 5);
    CHECK(v[3] == doctest::Approx(std::exp(-2.0)).epsilon(1e-8));
}

TEST_CASE("compile failures exit 1 with a located message")
{
    const auto dir = test::scratch("compile");
    const auto bad = write_model(dir, "bad.mml", "type P : particle { radius: 1; A: conc(1); proc (A) -> (B) {k9*A}; };");
    std::ostringstream out, err;
    CHECK(run_check({bad.string()}, out, err) == kExitCompile);
    CHECK(err.str().find("bad.mml:1:") != std::string::npos);
    CHECK(err.str().find("k9") != std::string::npos);

    RunConfig cfg;
    cfg.paths = {bad.string()};
    cfg.out = (dir / "o").string();
    CHECK(run(cfg).code == kExitCompile);
    CHECK_FALSE(fs::exists(dir / "o"));

    const auto syntax = write_model(dir, "syntax.mml", "type P : particle { radius 1 };");
    std::ostringstream o2, e2;
    CHECK(run_check({syntax.string()}, o2, e2) == kExitCompile);
    CHECK(run_check({(dir / "missing.mml").string()}, o2, e2) == kExitCompile);
}

TEST_CASE("empty model runs with a warning")
{
    const auto dir = test::scratch("empty");
    const auto empty = write_model(dir, "empty.mml", "");
    RunConfig cfg;
    cfg.paths = {empty.string()};
    cfg.steps = 10;
    cfg.out = (dir / "o").string();
    const auto r = run(cfg);
    CHECK(r.code == kExitOk);
    CHECK(r.err.find("warning") != std::string::npos);
}

TEST_CASE("runtime failure exits 2 and leaves a final state")
{
    const auto dir = test::scratch("runtime");
    const auto model = write_model(dir, "blow.mml", "type P : particle { radius: 0.5; A: amount(1.0); S: const amount(1.0);"
                                                     " proc (S) -> (A) {exp(exp(A*10))}; }; p : P(0,0,0);");
    RunConfig cfg;
    cfg.paths = {model.string()};
    cfg.steps = 100;
    cfg.out = (dir / "o").string();
    const auto r = run(cfg);
    CHECK(r.code == kExitRuntime);
    CHECK(r.err.find("runtime error at step") != std::string::npos);
    REQUIRE(fs::exists(dir / "o" / "final_state.json"));
    const auto cp = nlohmann::json::parse(test::read_text(dir / "o" / "final_state.json"));
    CHECK(cp["format"] == "mml-run");
    CHECK(fs::exists(dir / "o" / "species.csv"));
    CHECK_FALSE(has_partial_files(dir));
}

TEST_CASE("command line parsing and exit codes")
{
    const auto dir = test::scratch("argv");
    const auto model = write_model(dir, "m.mml", kModel);
    const std::string m = model.string(), o = (dir / "o").string();
    CHECK(shell("check " + m) == 0);
    CHECK(shell("run " + m + " --steps 5 --out " + o) == 0);
    CHECK(shell("run " + m + " --steps 5 --set k1=2 k2=0.1 --out " + o) == 0);
    CHECK(shell("run " + m + " --set k1 --out " + o) == 1);
    CHECK(shell("run " + m + " --set k1=abc --out " + o) == 1);
    CHECK(shell("run " + m + " --format xml --out " + o) == 1);
    CHECK(shell("run " + m + " --dt -1 --out " + o) == 1);
    CHECK(shell("frobnicate") == 1);
    CHECK(shell("check " + (dir / "nope.mml").string()) == 1);
}
