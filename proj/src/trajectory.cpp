#include "mml/trajectory.hpp"

#include "mml/diagnostics.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <sstream>

namespace mml {

namespace {

std::string number(double v)
{
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::filesystem::path part(const std::filesystem::path& p) { return p.string() + ".part"; }

} // namespace

TableFormat parse_format(const std::string& name)
{
    if (name == "csv")
        return TableFormat::Csv;
    if (name == "tsv")
        return TableFormat::Tsv;
    if (name == "json")
        return TableFormat::Json;
    throw RuntimeError("unknown output format '" + name + "' (csv, tsv, json)");
}

void write_atomic(const std::filesystem::path& path, const std::string& content)
{
    const auto tmp = part(path);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw RuntimeError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out)
            throw RuntimeError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw RuntimeError("cannot rename " + tmp.string() + ": " + ec.message());
}

namespace {

// The built-in `particle` type gets columns only when something instantiates it.
bool reported(const CompiledModel& model, std::size_t t)
{
    if (t != 0)
        return true;
    for (const auto& g : model.groups)
        if (g.type == 0)
            return true;
    for (const auto& r : model.discrete)
        for (const auto& o : r.outputs)
            if (o.kind == DiscreteOutput::Kind::Create && o.type == 0)
                return true;
    return false;
}

} // namespace

std::vector<std::string> species_columns(const CompiledModel& model)
{
    std::vector<std::string> cols{"time", "step"};
    for (auto& n : model.region_value_names())
        cols.push_back(n);
    for (std::size_t k = 0; k < model.particle_types.size(); ++k) {
        if (!reported(model, k))
            continue;
        const auto& t = model.particle_types[k];
        cols.push_back("count(" + t.name + ")");
        for (const auto& a : t.attributes)
            if (a.continuous())
                cols.push_back("sum(" + t.name + "." + a.name + ")");
    }
    cols.push_back("links");
    return cols;
}

std::vector<double> species_row(const CompiledModel& model, const SimState& state)
{
    std::vector<double> row{state.time, static_cast<double>(state.step)};
    row.insert(row.end(), state.C.begin(), state.C.end());
    for (std::size_t t = 0; t < model.particle_types.size(); ++t) {
        if (!reported(model, t))
            continue;
        const int type = static_cast<int>(t);
        const auto n = state.members(type).size();
        row.push_back(static_cast<double>(n));
        const auto& attrs = model.particle_types[t].attributes;
        for (std::size_t a = 0; a < attrs.size(); ++a) {
            if (!attrs[a].continuous())
                continue;
            const auto& col = state.column(type, static_cast<int>(a));
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                s += col[k];
            row.push_back(s);
        }
    }
    row.push_back(static_cast<double>(state.links().size()));
    return row;
}

std::string particle_record(const CompiledModel& model, const SimState& state)
{
    using nlohmann::json;
    json ps = json::array();
    for (std::size_t i = 0; i < state.count(); ++i) {
        const auto& pt = model.particle_types[static_cast<std::size_t>(state.type(i))];
        json attrs = json::object();
        for (std::size_t a = 0; a < pt.attributes.size(); ++a)
            attrs[pt.attributes[a].name] = state.attr(i, static_cast<int>(a));
        const Vec3& r = state.pos(i);
        const Vec3& v = state.vel(i);
        const int g = state.group(i);
        ps.push_back({{"id", state.handle(i)},
                      {"type", pt.name},
                      {"group", g >= 0 ? model.groups[static_cast<std::size_t>(g)].path : std::string()},
                      {"r", {r.x, r.y, r.z}},
                      {"v", {v.x, v.y, v.z}},
                      {"attributes", attrs}});
    }
    json j{{"time", state.time}, {"step", state.step}, {"links", state.links().size()}, {"particles", ps}};
    return j.dump();
}

TrajectoryWriter::TrajectoryWriter(const CompiledModel& model, std::filesystem::path dir, TableFormat format,
                                   bool particles)
    : model_(&model), dir_(std::move(dir)), format_(format), particles_(particles), columns_(species_columns(model))
{
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec)
        throw RuntimeError("cannot create output directory " + dir_.string() + ": " + ec.message());
    species_.open(part(species_path()), std::ios::binary | std::ios::trunc);
    if (!species_)
        throw RuntimeError("cannot write " + part(species_path()).string());
    if (format_ != TableFormat::Json) {
        const char sep = format_ == TableFormat::Csv ? ',' : '\t';
        for (std::size_t k = 0; k < columns_.size(); ++k)
            species_ << (k ? std::string(1, sep) : std::string()) << columns_[k];
        species_ << '\n';
    }
    if (particles_) {
        records_.open(part(particles_path()), std::ios::binary | std::ios::trunc);
        if (!records_)
            throw RuntimeError("cannot write " + part(particles_path()).string());
    }
}

TrajectoryWriter::~TrajectoryWriter()
{
    if (committed_)
        return;
    species_.close();
    records_.close();
    std::error_code ec;
    std::filesystem::remove(part(species_path()), ec);
    std::filesystem::remove(part(particles_path()), ec);
}

std::filesystem::path TrajectoryWriter::species_path() const
{
    switch (format_) {
    case TableFormat::Csv: return dir_ / "species.csv";
    case TableFormat::Tsv: return dir_ / "species.tsv";
    case TableFormat::Json: return dir_ / "species.jsonl";
    }
    return dir_ / "species.csv";
}

std::string TrajectoryWriter::format_row(const std::vector<double>& row) const
{
    std::string s;
    if (format_ == TableFormat::Json) {
        nlohmann::json j = nlohmann::json::object();
        for (std::size_t k = 0; k < row.size(); ++k)
            j[columns_[k]] = row[k];
        return j.dump();
    }
    const char sep = format_ == TableFormat::Csv ? ',' : '\t';
    for (std::size_t k = 0; k < row.size(); ++k) {
        if (k)
            s += sep;
        s += number(row[k]);
    }
    return s;
}

void TrajectoryWriter::sample(const SimState& state)
{
    if (committed_)
        throw RuntimeError("trajectory already committed");
    if (samples_ > 0 && !(state.time > last_time_))
        return;
    species_ << format_row(species_row(*model_, state)) << '\n';
    if (particles_)
        records_ << particle_record(*model_, state) << '\n';
    last_time_ = state.time;
    ++samples_;
}

void TrajectoryWriter::commit()
{
    if (committed_)
        return;
    species_.close();
    if (records_.is_open())
        records_.close();
    if (species_.fail() || (particles_ && records_.fail()))
        throw RuntimeError("trajectory write failed in " + dir_.string());
    std::filesystem::rename(part(species_path()), species_path());
    if (particles_)
        std::filesystem::rename(part(particles_path()), particles_path());
    committed_ = true;
}

} // namespace mml
