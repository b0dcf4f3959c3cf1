#pragma once

#include "mml/analyzer.hpp"
#include "mml/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace mml {

/// Reads, parses and merges the files in order, then analyzes the combined declarations.
CompiledModel compile_files(const std::vector<std::string>& paths, const AnalyzerOptions& options = {});

/// Renders a lexical, syntax or compile error with its span and scope trace.
std::string render_error(const std::exception& e);

struct RunConfig {
    std::vector<std::string> paths;
    double dt = 0.01;
    std::uint64_t steps = 100;
    std::uint64_t seed = 1;
    std::string out = "out";
    std::uint64_t stride = 1;
    std::map<std::string, double> overrides;
    std::string format = "csv";
    std::string resume;       // checkpoint to continue from
    bool particles = true;    // write particles.jsonl
};

enum ExitCode { kExitOk = 0, kExitCompile = 1, kExitRuntime = 2 };

/// `mml check`: prints the compile report. Returns an ExitCode.
int run_check(const std::vector<std::string>& paths, std::ostream& out, std::ostream& err);

/// `mml run`: samples every `stride` steps (and the last step), always writes checkpoint.json,
/// writes final_state.json and returns kExitRuntime when a runtime error aborts the run.
int run_simulation(const RunConfig& config, std::ostream& out, std::ostream& err);

} // namespace mml
