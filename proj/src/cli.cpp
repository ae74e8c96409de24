#include "cellvar/cli.hpp"

#include "cellvar/cell_inference.hpp"
#include "cellvar/dataset.hpp"
#include "cellvar/serialize.hpp"
#include "cellvar/study.hpp"
#include "cellvar/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

namespace fs = std::filesystem;

namespace cellvar::cli {

namespace {

// A bad flag value detected after parsing; reported with exit status 2.
class UsageError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "usage_error"; }
};

std::string iso_now()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string hex64(std::uint64_t v)
{
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string file_hash(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return hex64(fnv1a(buf.str()));
}

std::vector<double> parse_list(const std::string& text, const std::string& flag)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos)
                throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError(flag + ": '" + item + "' is not a number");
        }
    }
    return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v)
{
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string safe_file_name(const std::string& id)
{
    std::string out = id;
    for (char& c : out)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
            c = '_';
    return out.empty() ? "_" : out;
}

std::unique_ptr<PosteriorCache> cache_from_env()
{
    const char* dir = std::getenv(kCacheEnv);
    if (!dir || !*dir)
        return nullptr;
    return std::make_unique<PosteriorCache>(dir);
}

// Options shared by commands that read a dataset.
struct DataOptions {
    std::string data;
    std::string config;
    std::string name;
    std::string cell_col;
    std::string time_col;
    std::string capacity_col;
    double nominal = 0.0;

    void add_to(CLI::App& app)
    {
        app.add_option("--data", data, "Long-form CSV (cell_id,time,capacity)")
            ->required()
            ->check(CLI::ExistingFile);
        app.add_option("--config", config, "Ingestion config (key=value file)")
            ->check(CLI::ExistingFile);
        app.add_option("--name", name, "Dataset name (default: file stem)");
        app.add_option("--cell-col", cell_col, "Cell id column name");
        app.add_option("--time-col", time_col, "Time column name");
        app.add_option("--capacity-col", capacity_col, "Capacity column name (Ah)");
        app.add_option("--nominal", nominal, "Nominal capacity in Ah")
            ->check(CLI::PositiveNumber);
    }

    IngestConfig resolve(int min_points) const
    {
        IngestConfig cfg = config.empty() ? IngestConfig{} : IngestConfig::from_file(config);
        if (config.empty() || cfg.name == IngestConfig{}.name)
            cfg.name = fs::path(data).stem().string();
        if (!name.empty())
            cfg.name = name;
        if (!cell_col.empty())
            cfg.cell_id_column = cell_col;
        if (!time_col.empty())
            cfg.time_column = time_col;
        if (!capacity_col.empty())
            cfg.capacity_column = capacity_col;
        if (nominal > 0)
            cfg.nominal_capacity = nominal;
        cfg.min_points = std::max(cfg.min_points, min_points);
        return cfg;
    }
};

Json ingest_json(const IngestConfig& cfg)
{
    return {{"name", cfg.name},
            {"cell_id_column", cfg.cell_id_column},
            {"time_column", cfg.time_column},
            {"capacity_column", cfg.capacity_column},
            {"time_unit", cfg.time_unit},
            {"nominal_capacity",
             cfg.nominal_capacity ? Json(*cfg.nominal_capacity) : Json(nullptr)},
            {"min_points", cfg.min_points}};
}

struct ChainOptions {
    std::uint64_t seed = 0;
    McmcConfig mcmc;

    void add_to(CLI::App& app)
    {
        app.add_option("--seed", seed, "Master seed")->capture_default_str();
        app.add_option("--steps", mcmc.n_steps, "MCMC steps per chain")->capture_default_str();
        app.add_option("--burn-in", mcmc.burn_in, "Burn-in steps")->capture_default_str();
        app.add_option("--thin", mcmc.thin, "Thinning interval")->capture_default_str();
        app.add_option("--adapt-window", mcmc.adapt_window, "Proposal adaptation window")
            ->capture_default_str();
    }

    McmcConfig resolved() const
    {
        McmcConfig cfg = mcmc;
        cfg.seed = seed;
        try {
            cfg.validate();
        } catch (const ConfigError& e) {
            throw UsageError(e.what());
        }
        return cfg;
    }
};

struct Manifest {
    std::string command;
    std::vector<std::string> args;
    Json config = Json::object();
    Json inputs = Json::array();
    std::uint64_t seed = 0;
    std::string started = iso_now();

    void add_input(const fs::path& path)
    {
        inputs.push_back({{"path", path.string()}, {"fnv1a64", file_hash(path)}});
    }

    void write(const fs::path& dir) const
    {
        Json j{{"schema", "cellvar.manifest/1"},
               {"command", command},
               {"args", args},
               {"resolved_config", config},
               {"inputs", inputs},
               {"master_seed", seed},
               {"software_version", kSoftwareVersion},
               {"started_at", started},
               {"finished_at", iso_now()}};
        write_json(j, dir / "manifest.json");
    }
};

Dataset load_dataset(const DataOptions& data, const ModelSpec& spec, Warnings& warnings,
                     IngestConfig& resolved)
{
    resolved = data.resolve(spec.param_count() + 2);
    Dataset ds = ingest_csv(data.data, resolved, &warnings);
    return normalize(std::move(ds), spec.required_normalization());
}

void flush_warnings(const Warnings& warnings, std::ostream& err)
{
    for (const auto& w : warnings)
        err << "warning: " << w << '\n';
}

ModelSpec parse_model(const std::string& text)
{
    try {
        return ModelSpec::parse(text);
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }
}

void write_cells(const fs::path& dir, const ModelSpec& spec,
                 std::span<const CellPosterior> cells, const Dataset& ds)
{
    fs::create_directories(dir / "cells");
    for (const auto& c : cells)
        write_json(to_json(c), dir / "cells" / (safe_file_name(c.cell_id) + ".json"));

    std::ofstream table(dir / "summary.csv", std::ios::binary);
    table << "# schema=" << kTableSchema << " table=cell_summary\n";
    table << "cell_id,n_points";
    for (auto name : spec.param_names())
        table << ',' << name << "_mean," << name << "_var";
    table << ",acceptance_rate,min_ess,converged,start_converged\n";
    for (std::size_t k = 0; k < cells.size(); ++k) {
        const auto& c = cells[k];
        table << c.cell_id << ',' << ds.traces[k].n_points();
        for (Eigen::Index d = 0; d < c.mean.size(); ++d)
            table << ',' << format_double(c.mean(d)) << ',' << format_double(c.variance(d));
        table << ',' << format_double(c.diagnostics.acceptance_rate) << ','
              << format_double(c.diagnostics.ess.size() ? c.diagnostics.ess.minCoeff() : 0.0)
              << ',' << (c.diagnostics.converged ? 1 : 0) << ','
              << (c.start_converged ? 1 : 0) << '\n';
    }
}

void report_convergence(const ModelSpec& spec, std::span<const CellPosterior> cells,
                        std::ostream& err)
{
    std::vector<std::string> flagged;
    for (const auto& c : cells)
        if (!c.diagnostics.converged || !c.start_converged)
            flagged.push_back(c.cell_id);
    if (flagged.empty())
        return;
    if (spec.kind() == ModelKind::LinExp)
        err << "warning: LinExp fitted to data without a visible knee may not converge; ";
    else
        err << "warning: ";
    err << flagged.size() << " of " << cells.size() << " cells flagged as not converged:";
    for (const auto& id : flagged)
        err << ' ' << id;
    err << '\n';
}

// ---------------------------------------------------------------- commands

struct SynthCommand {
    std::string model;
    int k = 40;
    std::uint64_t seed = 0;
    std::string mu;
    std::string sigma_star;
    std::string correlation;
    double noise = 0.1;
    int points = 50;
    double span = 1000.0;
    double nominal = 1.1;
    std::string name;
    std::string out;

    void add_to(CLI::App& app)
    {
        app.add_option("--model", model, "linear1 | linear2 | linexp")->required();
        app.add_option("--k", k, "Number of cells")->capture_default_str()->check(
            CLI::PositiveNumber);
        app.add_option("--seed", seed, "Generator seed")->capture_default_str();
        app.add_option("--mu", mu, "Population means, comma separated");
        app.add_option("--sigma-star", sigma_star, "Population sds, comma separated");
        app.add_option("--correlation", correlation,
                       "Upper-triangle correlations, row major (e.g. r01,r02,r12)");
        app.add_option("--noise", noise, "Measurement noise sd (% capacity)")
            ->capture_default_str();
        app.add_option("--points", points, "Checkups per cell")->capture_default_str();
        app.add_option("--span", span, "Time span of the checkups")->capture_default_str();
        app.add_option("--nominal", nominal, "Nominal capacity in Ah")->capture_default_str();
        app.add_option("--name", name, "Dataset name");
        app.add_option("--out", out, "Output directory")->required();
    }

    int run(const std::vector<std::string>& args, std::ostream& out_stream, std::ostream&)
    {
        const ModelSpec spec = parse_model(model);
        PopulationTruth truth = PopulationTruth::defaults(spec);
        const int p = spec.param_count();
        if (!mu.empty()) {
            const auto v = parse_list(mu, "--mu");
            if (static_cast<int>(v.size()) != p)
                throw UsageError("--mu needs " + std::to_string(p) + " values");
            truth.mean = to_vector(v);
        }
        if (!sigma_star.empty()) {
            const auto v = parse_list(sigma_star, "--sigma-star");
            if (static_cast<int>(v.size()) != p)
                throw UsageError("--sigma-star needs " + std::to_string(p) + " values");
            truth.sd = to_vector(v);
        }
        if (!correlation.empty()) {
            const auto v = parse_list(correlation, "--correlation");
            if (static_cast<int>(v.size()) != p * (p - 1) / 2)
                throw UsageError("--correlation needs " + std::to_string(p * (p - 1) / 2) +
                                 " values");
            Eigen::MatrixXd r = Eigen::MatrixXd::Identity(p, p);
            std::size_t i = 0;
            for (int a = 0; a < p; ++a)
                for (int b = a + 1; b < p; ++b)
                    r(a, b) = r(b, a) = v[i++];
            truth.correlation = r;
        }
        truth.noise_sd = noise;
        truth.cell_count = k;
        truth.seed = seed;
        truth.nominal_capacity = nominal;
        if (!name.empty())
            truth.name = name;
        try {
            truth.time_grid = uniform_time_grid(points, span);
            truth.validate();
        } catch (const ConfigError& e) {
            throw UsageError(e.what());
        }

        const SyntheticDataset synthetic = generate(truth);
        const fs::path dir(out);
        fs::create_directories(dir);
        write_csv(synthetic.dataset, dir / "dataset.csv");
        {
            std::ofstream kv(dir / "dataset.kv", std::ios::binary);
            kv << "name=" << truth.name << '\n'
               << "nominal_capacity=" << format_double(truth.nominal_capacity) << '\n'
               << "time_unit=cycles\n";
        }
        write_truth_sidecar(truth, synthetic, dir / "truth.json");

        Manifest manifest;
        manifest.command = "synth";
        manifest.args = args;
        manifest.seed = seed;
        manifest.config = {{"model", std::string(spec.name())},
                           {"k", k},
                           {"mu_star", to_json(truth.mean)},
                           {"sigma_star", to_json(truth.sd)},
                           {"noise", noise},
                           {"points", points},
                           {"span", span},
                           {"nominal", nominal}};
        manifest.write(dir);
        out_stream << "wrote " << k << " cells to " << (dir / "dataset.csv").string() << '\n';
        return kSuccess;
    }
};

struct FitCommand {
    std::string model;
    DataOptions data;
    ChainOptions chain;
    unsigned threads = 0;
    std::string out;

    void add_to(CLI::App& app)
    {
        app.add_option("--model", model, "linear1 | linear2 | linexp")->required();
        data.add_to(app);
        chain.add_to(app);
        app.add_option("--threads", threads, "Worker threads (0 = all cores)");
        app.add_option("--out", out, "Output directory")->required();
    }

    int run(const std::vector<std::string>& args, std::ostream& out_stream, std::ostream& err)
    {
        const ModelSpec spec = parse_model(model);
        const McmcConfig mcmc = chain.resolved();
        Warnings warnings;
        IngestConfig ingest;
        const Dataset ds = load_dataset(data, spec, warnings, ingest);
        flush_warnings(warnings, err);
        const auto cache = cache_from_env();
        const auto cells = fit_cells(ds, spec, mcmc, chain.seed, threads, cache.get());

        const fs::path dir(out);
        fs::create_directories(dir);
        write_cells(dir, spec, cells, ds);
        report_convergence(spec, cells, err);

        Manifest manifest;
        manifest.command = "fit";
        manifest.args = args;
        manifest.seed = chain.seed;
        manifest.config = {{"model", std::string(spec.name())},
                           {"ingest", ingest_json(ingest)},
                           {"mcmc", to_json(mcmc)}};
        manifest.add_input(data.data);
        manifest.write(dir);
        out_stream << "fitted " << cells.size() << " cells with " << spec.name() << '\n';
        return kSuccess;
    }
};

struct StudyCommand {
    std::string model;
    DataOptions data;
    ChainOptions chain;
    StudyConfig study;
    int max_n = 0;
    unsigned threads = 0;
    std::string out;

    void add_to(CLI::App& app)
    {
        app.add_option("--model", model, "linear1 | linear2 | linexp")->required();
        data.add_to(app);
        chain.add_to(app);
        app.add_option("--repeats", study.n_repeats, "Repeats per sub-sample size")
            ->capture_default_str();
        app.add_option("--alpha", study.alpha, "Stability band width")->capture_default_str();
        app.add_option("--min", study.subsample_min, "Smallest sub-sample size")
            ->capture_default_str();
        app.add_option("--max", max_n, "Largest sub-sample size (default K - 3)");
        app.add_option("--tail-fraction", study.tail_fraction,
                       "Share of the largest sizes used for the stability line")
            ->capture_default_str();
        app.add_option("--threads", threads, "Worker threads (0 = all cores)");
        app.add_option("--out", out, "Output directory")->required();
    }

    int run(const std::vector<std::string>& args, std::ostream& out_stream, std::ostream& err)
    {
        const ModelSpec spec = parse_model(model);
        const McmcConfig mcmc = chain.resolved();
        study.master_seed = chain.seed;
        if (max_n > 0)
            study.subsample_max = max_n;
        Warnings warnings;
        IngestConfig ingest;
        const Dataset ds = load_dataset(data, spec, warnings, ingest);
        flush_warnings(warnings, err);
        try {
            study.validate(ds.cell_count());
        } catch (const ConfigError& e) {
            throw UsageError(e.what());
        }

        const auto cache = cache_from_env();
        const ExecutionOptions exec{threads, cache.get()};
        const auto cells = fit_cells(ds, spec, mcmc, study.master_seed, threads, cache.get());
        report_convergence(spec, cells, err);
        const StudyResult result = run_study(ds, spec, cells, study, mcmc, exec);
        const auto trace = single_draw_trace(cells, study, mcmc, true, exec);
        if (!result.stability.empty() && result.stability.front().fit_region.empty())
            err << "warning: fewer than 4 sub-sample sizes, so no stability line was fitted\n";

        const fs::path dir(out);
        fs::create_directories(dir);
        write_json(to_json(result), dir / "study.json");
        write_curve_table(result, dir / "curve.csv");
        write_repeats_table(result, dir / "repeats.csv");
        write_required_n_table(result, dir / "required_n.csv");
        write_histogram_table(result, dir / "histogram.csv");
        write_single_draw_table(spec, trace, dir / "single_draw.csv");

        Manifest manifest;
        manifest.command = "study";
        manifest.args = args;
        manifest.seed = study.master_seed;
        manifest.config = {{"model", std::string(spec.name())},
                           {"ingest", ingest_json(ingest)},
                           {"mcmc", to_json(mcmc)},
                           {"study", to_json(study)}};
        manifest.add_input(data.data);
        manifest.write(dir);

        for (std::size_t d = 0; d < result.stability.size(); ++d) {
            const auto& s = result.stability[d];
            out_stream << spec.param_names()[d] << ": required_N="
                       << (s.required_n ? std::to_string(*s.required_n) : "not-reached")
                       << " a=" << format_double(s.slope) << '\n';
        }
        out_stream << "required_N="
                   << (result.required_n_model ? std::to_string(*result.required_n_model)
                                               : "not-reached")
                   << '\n';
        return kSuccess;
    }
};

// A LinExp posterior that did not converge has no identified knee (typical
// for traces that are still linear); such cells are left whole.
void add_knee(std::map<std::string, KneeParams>& knees, const CellPosterior& post,
              Warnings& warnings)
{
    if (!post.diagnostics.converged) {
        warnings.push_back("cell '" + post.cell_id +
                           "' kept whole: its LinExp fit did not converge, so no knee "
                           "was identified");
        return;
    }
    knees[post.cell_id] = KneeParams{post.mean(1), post.mean(2)};
}

struct TruncateCommand {
    DataOptions data;
    ChainOptions chain;
    std::string knee_fits;
    int min_points = 4;
    unsigned threads = 0;
    std::string out;

    void add_to(CLI::App& app)
    {
        data.add_to(app);
        chain.add_to(app);
        app.add_option("--knee-fits", knee_fits,
                       "Output directory of 'fit --model linexp' on the same data "
                       "(fitted here when omitted)")
            ->check(CLI::ExistingDirectory);
        app.add_option("--min-points", min_points, "Drop cells left with fewer points")
            ->capture_default_str();
        app.add_option("--threads", threads, "Worker threads (0 = all cores)");
        app.add_option("--out", out, "Output directory")->required();
    }

    int run(const std::vector<std::string>& args, std::ostream& out_stream, std::ostream& err)
    {
        const ModelSpec linexp(ModelKind::LinExp);
        Warnings warnings;
        IngestConfig ingest;
        const Dataset ds = load_dataset(data, linexp, warnings, ingest);

        std::map<std::string, KneeParams> knees;
        Manifest manifest;
        if (!knee_fits.empty()) {
            for (const auto& id : ds.cell_ids()) {
                const fs::path record =
                    fs::path(knee_fits) / "cells" / (safe_file_name(id) + ".json");
                if (!fs::exists(record))
                    throw DataError("no knee fit for cell '" + id + "' in " + knee_fits);
                const CellPosterior post = cell_posterior_from_json(read_json(record));
                if (post.mean.size() != 3)
                    throw DataError("knee fit for cell '" + id + "' is not a LinExp fit");
                add_knee(knees, post, warnings);
                manifest.add_input(record);
            }
        } else {
            const auto cache = cache_from_env();
            const auto cells =
                fit_cells(ds, linexp, chain.resolved(), chain.seed, threads, cache.get());
            report_convergence(linexp, cells, err);
            for (const auto& c : cells)
                add_knee(knees, c, warnings);
        }

        const Dataset cut = truncate_pre_knee(ds, knees, min_points, &warnings);
        flush_warnings(warnings, err);

        const fs::path dir(out);
        fs::create_directories(dir);
        write_csv(cut, dir / "dataset.csv");
        {
            std::ofstream kv(dir / "dataset.kv", std::ios::binary);
            kv << "name=" << cut.name << "-pre-knee\n";
            if (cut.nominal_capacity)
                kv << "nominal_capacity=" << format_double(*cut.nominal_capacity) << '\n';
            kv << "time_unit=" << cut.time_unit << '\n';
        }
        manifest.command = "truncate";
        manifest.args = args;
        manifest.seed = chain.seed;
        manifest.config = {{"ingest", ingest_json(ingest)},
                           {"min_points", min_points},
                           {"knee_fits", knee_fits}};
        if (knee_fits.empty())
            manifest.config["mcmc"] = to_json(chain.resolved());
        manifest.add_input(data.data);
        manifest.write(dir);
        out_stream << "kept " << cut.cell_count() << " of " << ds.cell_count()
                   << " cells before the knee\n";
        return kSuccess;
    }
};

std::vector<std::string> with_option(std::vector<std::string> args, const std::string& flag,
                                     const std::string& value)
{
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == flag && i + 1 < args.size()) {
            args[i + 1] = value;
            return args;
        }
        if (args[i].rfind(flag + "=", 0) == 0) {
            args[i] = flag + "=" + value;
            return args;
        }
    }
    args.push_back(flag);
    args.push_back(value);
    return args;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct RerunCommand {
    std::string manifest;
    std::string out;
    unsigned threads = 0;

    void add_to(CLI::App& app)
    {
        app.add_option("--manifest", manifest, "manifest.json of an earlier run")
            ->required()
            ->check(CLI::ExistingFile);
        app.add_option("--out", out, "Output directory (default: the original)");
        app.add_option("--threads", threads, "Worker threads (0 = all cores)");
    }

    int run(std::ostream& out_stream, std::ostream& err)
    {
        const Json m = read_json(manifest);
        std::vector<std::string> args = m.at("args").get<std::vector<std::string>>();
        for (const auto& input : m.at("inputs")) {
            const fs::path path = input.at("path").get<std::string>();
            if (!fs::exists(path) || file_hash(path) != input.at("fnv1a64").get<std::string>())
                err << "warning: input " << path.string() << " changed since the manifest\n";
        }
        if (!out.empty())
            args = with_option(std::move(args), "--out", out);
        const std::string command = m.at("command").get<std::string>();
        if (threads > 0 && command != "synth")
            args = with_option(std::move(args), "--threads", std::to_string(threads));
        return dispatch(args, out_stream, err);
    }
};

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"cellvar: cell-to-cell variability and required sample size for "
                 "battery ageing tests"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for all subcommands");

    SynthCommand synth;
    FitCommand fit;
    StudyCommand study;
    TruncateCommand truncate;
    RerunCommand rerun;
    synth.add_to(*app.add_subcommand("synth", "Generate a synthetic dataset from a known population"));
    fit.add_to(*app.add_subcommand("fit", "Per-cell (first-level) posterior fits"));
    study.add_to(*app.add_subcommand("study", "Sub-sampling study and required cell count"));
    truncate.add_to(*app.add_subcommand("truncate", "Cut traces before the LinExp knee"));
    rerun.add_to(*app.add_subcommand("rerun", "Repeat a run from its manifest"));

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << Json{{"error", {{"kind", "usage_error"}, {"message", e.what()}}}}.dump() << '\n';
        err << "run 'cellvar --help' for usage\n";
        return kUsageError;
    }

    const CLI::App* chosen = app.get_subcommands().front();
    const std::string name = chosen->get_name();
    if (name == "synth")
        return synth.run(args, out, err);
    if (name == "fit")
        return fit.run(args, out, err);
    if (name == "study")
        return study.run(args, out, err);
    if (name == "truncate")
        return truncate.run(args, out, err);
    return rerun.run(out, err);
}

void error_record(std::ostream& err, const char* kind, const std::string& message)
{
    err << Json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    try {
        return dispatch(args, out, err);
    } catch (const UsageError& e) {
        error_record(err, e.kind(), e.what());
        return kUsageError;
    } catch (const ConfigError& e) {
        error_record(err, e.kind(), e.what());
        return kUsageError;
    } catch (const Error& e) {
        error_record(err, e.kind(), e.what());
        return kRuntimeFailure;
    } catch (const std::exception& e) {
        error_record(err, "runtime_error", e.what());
        return kRuntimeFailure;
    }
}

} // namespace cellvar::cli
