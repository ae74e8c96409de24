#include "cellvar/dataset.hpp"

#include "cellvar/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string_view>
#include <unordered_map>

namespace cellvar {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

// Splits one CSV line; double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv(std::string_view line)
{
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back(trim(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    fields.emplace_back(trim(field));
    return fields;
}

bool parse_double(std::string_view text, double& out)
{
    text = trim(text);
    if (!text.empty() && text.front() == '+')
        text.remove_prefix(1);
    if (text.empty())
        return false;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size() && std::isfinite(out);
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name)
{
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
        throw DataError("CSV header has no column named '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

struct Row {
    double time;
    double capacity;
};

} // namespace

std::vector<std::string> Dataset::cell_ids() const
{
    std::vector<std::string> ids;
    ids.reserve(traces.size());
    for (const auto& t : traces)
        ids.push_back(t.cell_id);
    return ids;
}

const CapacityTrace& Dataset::trace(const std::string& cell_id) const
{
    for (const auto& t : traces)
        if (t.cell_id == cell_id)
            return t;
    throw DataError("dataset '" + name + "' has no cell '" + cell_id + "'");
}

void IngestConfig::apply(const std::map<std::string, std::string>& kv)
{
    for (const auto& [key, value] : kv) {
        if (key == "name")
            name = value;
        else if (key == "cell_id_column")
            cell_id_column = value;
        else if (key == "time_column")
            time_column = value;
        else if (key == "capacity_column")
            capacity_column = value;
        else if (key == "time_unit")
            time_unit = value;
        else if (key == "nominal_capacity") {
            double v = 0;
            if (!parse_double(value, v) || v <= 0)
                throw ConfigError("nominal_capacity must be a positive number, got '" +
                                  value + "'");
            nominal_capacity = v;
        } else if (key == "min_points") {
            double v = 0;
            if (!parse_double(value, v) || v < 1 || v != std::floor(v))
                throw ConfigError("min_points must be a positive integer, got '" + value + "'");
            min_points = static_cast<int>(v);
        } else {
            throw ConfigError("unknown ingestion config key '" + key + "'");
        }
    }
}

IngestConfig IngestConfig::from_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = line;
        if (const auto hash = view.find('#'); hash != std::string_view::npos)
            view = view.substr(0, hash);
        view = trim(view);
        if (view.empty())
            continue;
        const auto eq = view.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                              ": expected key=value");
        kv[std::string(trim(view.substr(0, eq)))] = std::string(trim(view.substr(eq + 1)));
    }
    IngestConfig cfg;
    cfg.apply(kv);
    return cfg;
}

Dataset parse_csv(std::istream& in, const IngestConfig& config, Warnings* warnings)
{
    std::string line;
    int line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0)
            line.erase(0, 3);
        if (trim(line).empty())
            continue;
        header = split_csv(line);
        break;
    }
    if (header.empty())
        throw DataError("CSV input is empty (a header row is required)");

    const std::size_t id_col = column_index(header, config.cell_id_column);
    const std::size_t time_col = column_index(header, config.time_column);
    const std::size_t cap_col = column_index(header, config.capacity_column);
    const std::size_t needed = std::max({id_col, time_col, cap_col}) + 1;

    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<Row>> rows;
    std::vector<int> bad_lines;
    std::vector<std::string> bad_reasons;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (trim(line).empty())
            continue;
        const auto fields = split_csv(line);
        Row row{};
        std::string reason;
        if (fields.size() < needed)
            reason = "expected at least " + std::to_string(needed) + " fields";
        else if (fields[id_col].empty())
            reason = "empty cell id";
        else if (!parse_double(fields[time_col], row.time) || row.time < 0)
            reason = "time '" + fields[time_col] + "' is not a non-negative number";
        else if (!parse_double(fields[cap_col], row.capacity) || row.capacity <= 0)
            reason = "capacity '" + fields[cap_col] + "' is not a positive number";
        if (!reason.empty()) {
            bad_lines.push_back(line_no);
            bad_reasons.push_back(std::move(reason));
            continue;
        }
        auto [it, inserted] = rows.try_emplace(fields[id_col]);
        if (inserted)
            order.push_back(fields[id_col]);
        it->second.push_back(row);
    }

    if (!bad_lines.empty()) {
        std::ostringstream msg;
        msg << "malformed CSV rows at line";
        if (bad_lines.size() > 1)
            msg << 's';
        for (std::size_t i = 0; i < bad_lines.size(); ++i)
            msg << (i ? ", " : " ") << bad_lines[i];
        msg << " (line " << bad_lines.front() << ": " << bad_reasons.front() << ')';
        throw DataError(msg.str());
    }

    Dataset dataset;
    dataset.name = config.name;
    dataset.nominal_capacity = config.nominal_capacity;
    dataset.time_unit = config.time_unit;

    std::size_t rejected = 0;
    for (const auto& id : order) {
        auto& cell_rows = rows[id];
        // Stable sort keeps file order among equal times; the last one wins.
        std::stable_sort(cell_rows.begin(), cell_rows.end(),
                         [](const Row& a, const Row& b) { return a.time < b.time; });
        std::vector<Row> unique;
        for (const auto& r : cell_rows) {
            if (!unique.empty() && unique.back().time == r.time)
                unique.back() = r;
            else
                unique.push_back(r);
        }
        if (static_cast<int>(unique.size()) < config.min_points) {
            ++rejected;
            if (warnings)
                warnings->push_back("cell '" + id + "' rejected: " +
                                    std::to_string(unique.size()) + " points, need " +
                                    std::to_string(config.min_points));
            continue;
        }
        CapacityTrace trace;
        trace.cell_id = id;
        const auto n = static_cast<Eigen::Index>(unique.size());
        trace.times.resize(n);
        trace.capacities_ah.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            trace.times(i) = unique[static_cast<std::size_t>(i)].time - unique.front().time;
            trace.capacities_ah(i) = unique[static_cast<std::size_t>(i)].capacity;
        }
        dataset.traces.push_back(std::move(trace));
    }

    if (rejected > 0 && dataset.cell_count() < kMinStudyCells)
        throw DataError("only " + std::to_string(dataset.cell_count()) +
                        " cells remain after rejecting " + std::to_string(rejected) +
                        " short cells; at least " + std::to_string(kMinStudyCells) +
                        " are required");
    return dataset;
}

Dataset ingest_csv(const std::filesystem::path& path, const IngestConfig& config,
                   Warnings* warnings)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open CSV file " + path.string());
    return parse_csv(in, config, warnings);
}

namespace {

std::string csv_field(const std::string& text)
{
    if (text.find_first_of(",\"") == std::string::npos)
        return text;
    std::string out = "\"";
    for (char c : text) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + '"';
}

} // namespace

void write_csv(const Dataset& dataset, std::ostream& out)
{
    out << "cell_id,time,capacity\n";
    out << std::setprecision(17);
    for (const auto& trace : dataset.traces) {
        const std::string id = csv_field(trace.cell_id);
        for (Eigen::Index i = 0; i < trace.n_points(); ++i)
            out << id << ',' << trace.times(i) << ',' << trace.capacities_ah(i) << '\n';
    }
}

void write_csv(const Dataset& dataset, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write CSV file " + path.string());
    write_csv(dataset, out);
}

Dataset normalize(Dataset dataset, Normalization mode)
{
    if (mode == Normalization::NominalCapacity &&
        (!dataset.nominal_capacity || !(*dataset.nominal_capacity > 0)))
        throw DataError("nominal-capacity normalisation needs a positive nominal capacity "
                        "for dataset '" + dataset.name + "'");
    for (auto& trace : dataset.traces) {
        if (trace.n_points() == 0)
            throw DataError("trace '" + trace.cell_id + "' is empty");
        double reference = 0;
        if (mode == Normalization::InitialCapacity) {
            reference = trace.capacities_ah(0);
            if (!(reference > 0))
                throw DataError("trace '" + trace.cell_id +
                                "' has a non-positive first capacity");
        } else {
            reference = *dataset.nominal_capacity;
        }
        trace.capacities_pct = trace.capacities_ah / reference * 100.0;
        if (mode == Normalization::InitialCapacity)
            trace.capacities_pct(0) = 100.0;
        trace.normalization = mode;
    }
    return dataset;
}

Dataset truncate_pre_knee(const Dataset& dataset,
                          const std::map<std::string, KneeParams>& knees, int min_points,
                          Warnings* warnings)
{
    Dataset out = dataset;
    out.traces.clear();
    for (const auto& trace : dataset.traces) {
        const auto knee = knees.find(trace.cell_id);
        if (knee == knees.end()) {
            out.traces.push_back(trace);
            continue;
        }
        const double cutoff = pre_knee_cutoff(knee->second);
        Eigen::Index keep = 0;
        while (keep < trace.n_points() && trace.times(keep) <= cutoff)
            ++keep;
        if (keep < min_points) {
            if (warnings)
                warnings->push_back("cell '" + trace.cell_id + "' dropped: only " +
                                    std::to_string(keep) + " points before t_f - 2 tau = " +
                                    std::to_string(cutoff));
            continue;
        }
        CapacityTrace cut = trace;
        cut.times = trace.times.head(keep);
        cut.capacities_ah = trace.capacities_ah.head(keep);
        if (trace.capacities_pct.size() == trace.n_points())
            cut.capacities_pct = trace.capacities_pct.head(keep);
        out.traces.push_back(std::move(cut));
    }
    if (out.traces.empty())
        throw DataError("pre-knee truncation dropped every cell of dataset '" +
                        dataset.name + "'");
    return out;
}

std::uint64_t dataset_hash(const Dataset& dataset)
{
    std::uint64_t h = fnv1a(dataset.name);
    auto mix_bytes = [&h](const void* data, std::size_t size) {
        h = fnv1a(std::string_view(static_cast<const char*>(data), size), h);
    };
    for (const auto& trace : dataset.traces) {
        h = fnv1a(trace.cell_id, h);
        mix_bytes(trace.times.data(), sizeof(double) * static_cast<std::size_t>(trace.times.size()));
        mix_bytes(trace.capacities_ah.data(),
                  sizeof(double) * static_cast<std::size_t>(trace.capacities_ah.size()));
        mix_bytes(trace.capacities_pct.data(),
                  sizeof(double) * static_cast<std::size_t>(trace.capacities_pct.size()));
    }
    if (dataset.nominal_capacity)
        mix_bytes(&*dataset.nominal_capacity, sizeof(double));
    return h;
}

} // namespace cellvar
