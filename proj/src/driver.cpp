#include "mml/driver.hpp"

#include "mml/diagnostics.hpp"
#include "mml/parser.hpp"
#include "mml/report.hpp"
#include "mml/simulation.hpp"
#include "mml/trajectory.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace mml {

namespace {

/// Unreadable input; reported like a compile error.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError(path + ": cannot read file");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void print_warnings(const CompiledModel& m, std::ostream& err)
{
    for (const auto& w : m.warnings)
        err << "warning: " << w << '\n';
}

} // namespace

CompiledModel compile_files(const std::vector<std::string>& paths, const AnalyzerOptions& options)
{
    ast::SyntaxTree all;
    for (const auto& p : paths) {
        auto tree = parse_source(read_file(p), p);
        for (auto& d : tree.declarations)
            all.declarations.push_back(std::move(d));
    }
    return analyze(all, options);
}

std::string render_error(const std::exception& e)
{
    std::string s = e.what();
    if (const auto* c = dynamic_cast<const CompileError*>(&e))
        for (const auto& t : c->trace())
            s += "\n  note: " + t;
    return s;
}

int run_check(const std::vector<std::string>& paths, std::ostream& out, std::ostream& err)
{
    CompiledModel m;
    try {
        m = compile_files(paths);
    } catch (const LexError& e) {
        err << render_error(e) << '\n';
        return kExitCompile;
    } catch (const SyntaxError& e) {
        err << render_error(e) << '\n';
        return kExitCompile;
    } catch (const CompileError& e) {
        err << render_error(e) << '\n';
        return kExitCompile;
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitCompile;
    }
    print_warnings(m, err);
    out << check_report(m);
    return kExitOk;
}

int run_simulation(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    if (!(cfg.dt > 0.0)) {
        err << "error: --dt must be positive\n";
        return kExitRuntime;
    }
    if (cfg.stride < 1) {
        err << "error: --stride must be at least 1\n";
        return kExitRuntime;
    }
    CompiledModel model;
    try {
        AnalyzerOptions opts;
        opts.overrides = cfg.overrides;
        model = compile_files(cfg.paths, opts);
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitCompile;
    } catch (const LexError& e) {
        err << render_error(e) << '\n';
        return kExitCompile;
    } catch (const SyntaxError& e) {
        err << render_error(e) << '\n';
        return kExitCompile;
    } catch (const CompileError& e) {
        err << render_error(e) << '\n';
        return kExitCompile;
    }
    print_warnings(model, err);

    const std::filesystem::path dir(cfg.out);
    DiagnosticLog log;
    std::unique_ptr<Simulation> sim;
    std::unique_ptr<TrajectoryWriter> traj;
    try {
        if (!cfg.resume.empty()) {
            std::ifstream in(cfg.resume, std::ios::binary);
            if (!in)
                throw RuntimeError("cannot read checkpoint " + cfg.resume);
            sim = std::make_unique<Simulation>(model, in, &log);
        } else {
            sim = std::make_unique<Simulation>(model, cfg.seed, &log);
        }
        traj = std::make_unique<TrajectoryWriter>(model, dir, parse_format(cfg.format), cfg.particles);
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }

    std::size_t reported = 0;
    auto flush_log = [&] {
        for (; reported < log.size(); ++reported) {
            const auto& d = log.entries()[reported];
            err << "warning: t=" << d.time << ": " << d.message << '\n';
        }
    };
    auto finish = [&](bool failed) {
        flush_log();
        std::string diag;
        for (const auto& d : log.entries())
            diag += "t=" + std::to_string(d.time) + ": " + d.message + '\n';
        traj->commit();
        std::ostringstream cp;
        sim->save_checkpoint(cp);
        write_atomic(dir / "checkpoint.json", cp.str());
        if (failed)
            write_atomic(dir / "final_state.json", cp.str());
        write_atomic(dir / "diagnostics.txt", diag);
    };

    try {
        traj->sample(sim->state());
        for (std::uint64_t k = 1; k <= cfg.steps; ++k) {
            sim->step(cfg.dt);
            if (k % cfg.stride == 0 || k == cfg.steps)
                traj->sample(sim->state());
            flush_log();
        }
    } catch (const std::exception& e) {
        err << "runtime error at step " << sim->state().step << " (t=" << sim->state().time << "): " << e.what()
            << '\n';
        try {
            finish(true);
        } catch (const std::exception& e2) {
            err << "error: " << e2.what() << '\n';
        }
        return kExitRuntime;
    }
    try {
        finish(false);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    out << "wrote " << traj->samples() << " samples to " << dir.string() << '\n';
    return kExitOk;
}

} // namespace mml
