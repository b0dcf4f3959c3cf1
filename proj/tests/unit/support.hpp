#pragma once

#include "mml/analyzer.hpp"
#include "mml/parser.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace mml::test {

inline std::string read_text(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string corpus(const std::string& name) { return read_text(std::filesystem::path(MML_CORPUS_DIR) / name); }

inline CompiledModel compile(const std::string& src, AnalyzerOptions opts = {})
{
    return analyze(parse_source(src), opts);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name)
{
    auto p = std::filesystem::temp_directory_path() / ("mml_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace mml::test
