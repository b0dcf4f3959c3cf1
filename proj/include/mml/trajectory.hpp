#pragma once

#include "mml/model.hpp"
#include "mml/state.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace mml {

enum class TableFormat { Csv, Tsv, Json };

/// Parses "csv", "tsv" or "json".
TableFormat parse_format(const std::string& name);

/// Writes `content` to a sibling temp file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Column names of the species table: time, step, every region value, then per-type particle
/// counts and attribute totals, then the live link count.
std::vector<std::string> species_columns(const CompiledModel& model);
std::vector<double> species_row(const CompiledModel& model, const SimState& state);

/// One particle record line: time, step and every particle with its attributes.
std::string particle_record(const CompiledModel& model, const SimState& state);

/// Streams samples into temp files; commit() renames them into place.
class TrajectoryWriter {
public:
    TrajectoryWriter(const CompiledModel& model, std::filesystem::path dir, TableFormat format,
                     bool particles = true);
    ~TrajectoryWriter();

    void sample(const SimState& state);
    void commit();
    std::size_t samples() const { return samples_; }

    std::filesystem::path species_path() const;
    std::filesystem::path particles_path() const { return dir_ / "particles.jsonl"; }

private:
    std::string format_row(const std::vector<double>& row) const;

    const CompiledModel* model_;
    std::filesystem::path dir_;
    TableFormat format_;
    bool particles_;
    std::vector<std::string> columns_;
    std::ofstream species_;
    std::ofstream records_;
    std::size_t samples_ = 0;
    double last_time_ = 0.0;
    bool committed_ = false;
};

} // namespace mml
