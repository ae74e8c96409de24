#include "cellvar/serialize.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

namespace cellvar {

namespace {

double number_or_nan(const Json& j)
{
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

Json number(double v)
{
    return std::isfinite(v) ? Json(v) : Json(nullptr);
}

Json optional_int(const std::optional<int>& v)
{
    return v ? Json(*v) : Json(nullptr);
}

std::ofstream open_table(const std::filesystem::path& path, std::string_view table)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out << "# schema=" << kTableSchema << " table=" << table << '\n';
    return out;
}

Json stats_json(const EstimatorStats& s)
{
    return {{"sd_of_sd", number(s.sd_of_sd)},
            {"sd_of_mean", number(s.sd_of_mean)},
            {"mean_of_sd", number(s.mean_of_sd)},
            {"mean_of_mean", number(s.mean_of_mean)}};
}

} // namespace

std::string format_double(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

Json to_json(const Eigen::VectorXd& v)
{
    Json j = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        j.push_back(number(v(i)));
    return j;
}

Json to_json(const Eigen::MatrixXd& m)
{
    Json j = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            row.push_back(number(m(r, c)));
        j.push_back(std::move(row));
    }
    return j;
}

Eigen::VectorXd vector_from_json(const Json& j)
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = number_or_nan(j[i]);
    return v;
}

Eigen::MatrixXd matrix_from_json(const Json& j)
{
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(j[r].size()) != cols)
            throw DataError("ragged matrix in JSON record");
        for (Eigen::Index c = 0; c < cols; ++c)
            m(r, c) = number_or_nan(j[r][c]);
    }
    return m;
}

Json to_json(const McmcConfig& cfg)
{
    return {{"n_steps", cfg.n_steps},
            {"burn_in", cfg.burn_in},
            {"thin", cfg.thin},
            {"seed", cfg.seed},
            {"adapt_window", cfg.adapt_window}};
}

McmcConfig mcmc_config_from_json(const Json& j)
{
    McmcConfig cfg;
    cfg.n_steps = j.at("n_steps").get<int>();
    cfg.burn_in = j.at("burn_in").get<int>();
    cfg.thin = j.at("thin").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.adapt_window = j.at("adapt_window").get<int>();
    return cfg;
}

Json to_json(const StudyConfig& cfg)
{
    return {{"n_repeats", cfg.n_repeats},
            {"subsample_min", cfg.subsample_min},
            {"subsample_max", optional_int(cfg.subsample_max)},
            {"alpha", cfg.alpha},
            {"master_seed", cfg.master_seed},
            {"tail_fraction", cfg.tail_fraction}};
}

StudyConfig study_config_from_json(const Json& j)
{
    StudyConfig cfg;
    cfg.n_repeats = j.at("n_repeats").get<int>();
    cfg.subsample_min = j.at("subsample_min").get<int>();
    if (!j.at("subsample_max").is_null())
        cfg.subsample_max = j.at("subsample_max").get<int>();
    cfg.alpha = j.at("alpha").get<double>();
    cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
    cfg.tail_fraction = j.at("tail_fraction").get<double>();
    return cfg;
}

Json to_json(const ChainDiagnostics& d)
{
    return {{"acceptance_rate", number(d.acceptance_rate)},
            {"effective_sample_size", to_json(d.ess)},
            {"converged", d.converged}};
}

ChainDiagnostics diagnostics_from_json(const Json& j)
{
    ChainDiagnostics d;
    d.acceptance_rate = number_or_nan(j.at("acceptance_rate"));
    d.ess = vector_from_json(j.at("effective_sample_size"));
    d.converged = j.at("converged").get<bool>();
    return d;
}

Json to_json(const CellPosterior& p, bool include_samples)
{
    Json j{{"record", "cell_posterior"},
           {"cell_id", p.cell_id},
           {"mu_k", to_json(p.mean)},
           {"sigma2_k", to_json(p.variance)},
           {"diagnostics", to_json(p.diagnostics)},
           {"start_converged", p.start_converged}};
    if (include_samples)
        j["samples"] = to_json(p.samples);
    return j;
}

CellPosterior cell_posterior_from_json(const Json& j)
{
    CellPosterior p;
    p.cell_id = j.at("cell_id").get<std::string>();
    p.mean = vector_from_json(j.at("mu_k"));
    p.variance = vector_from_json(j.at("sigma2_k"));
    p.diagnostics = diagnostics_from_json(j.at("diagnostics"));
    p.start_converged = j.value("start_converged", true);
    if (j.contains("samples"))
        p.samples = matrix_from_json(j.at("samples"));
    return p;
}

Json to_json(const PopulationPosterior& p, bool include_samples)
{
    Json j{{"record", "population_posterior"},
           {"mu_g", to_json(p.mean)},
           {"sigma_g", to_json(p.sd)},
           {"mu_g_posterior_sd", to_json(p.mean_sd)},
           {"sigma_g_posterior_sd", to_json(p.sd_sd)},
           {"diagnostics", to_json(p.diagnostics)}};
    if (include_samples)
        j["samples"] = to_json(p.samples);
    return j;
}

PopulationPosterior population_posterior_from_json(const Json& j)
{
    PopulationPosterior p;
    p.mean = vector_from_json(j.at("mu_g"));
    p.sd = vector_from_json(j.at("sigma_g"));
    p.mean_sd = vector_from_json(j.at("mu_g_posterior_sd"));
    p.sd_sd = vector_from_json(j.at("sigma_g_posterior_sd"));
    p.diagnostics = diagnostics_from_json(j.at("diagnostics"));
    if (j.contains("samples"))
        p.samples = matrix_from_json(j.at("samples"));
    return p;
}

Json to_json(const SsdSummary& s)
{
    return {{"record", "ssd_summary"}, {"m_g", to_json(s.mean)}, {"s_g", to_json(s.sd)}};
}

SsdSummary ssd_summary_from_json(const Json& j)
{
    return {vector_from_json(j.at("m_g")), vector_from_json(j.at("s_g"))};
}

Json to_json(const StabilityFit& f)
{
    return {{"a", number(f.slope)},
            {"b", number(f.intercept)},
            {"fit_region", f.fit_region},
            {"required_n", optional_int(f.required_n)},
            {"converged", f.converged}};
}

Json to_json(const StudyResult& r)
{
    Json names = Json::array();
    for (auto n : r.spec.param_names())
        names.push_back(std::string(n));

    Json cells = Json::array();
    for (std::size_t k = 0; k < r.cell_ids.size(); ++k)
        cells.push_back({{"cell_id", r.cell_ids[k]},
                         {"mu_k", to_json(r.cell_summaries[k].mean)},
                         {"sigma2_k", to_json(r.cell_summaries[k].variance)}});

    Json curves = Json::array();
    for (const auto& c : r.curves) {
        Json pts = Json::array();
        for (const auto& p : c.points)
            pts.push_back({{"n", p.n},
                           {"mlb", stats_json(p.mlb)},
                           {"ssd", stats_json(p.ssd)},
                           {"valid_repeats", p.valid_repeats},
                           {"excluded_repeats", p.excluded_repeats}});
        curves.push_back({{"param", c.param}, {"points", pts}});
    }

    Json stability = Json::array();
    for (std::size_t d = 0; d < r.stability.size(); ++d) {
        Json s = to_json(r.stability[d]);
        s["param"] = std::string(r.spec.param_names()[d]);
        stability.push_back(std::move(s));
    }

    return {{"schema", kStudySchema},
            {"dataset", r.dataset_name},
            {"model", std::string(r.spec.name())},
            {"param_names", names},
            {"cell_count", r.cell_ids.size()},
            {"cells", cells},
            {"curves", curves},
            {"stability", stability},
            {"required_n_model", optional_int(r.required_n_model)},
            {"correlation", to_json(r.correlation)},
            {"full_sample", to_json(r.full_sample)},
            {"full_sample_ssd", to_json(r.full_sample_ssd)},
            {"provenance",
             {{"study_config", to_json(r.config)},
              {"mcmc_config", to_json(r.mcmc)},
              {"master_seed", r.config.master_seed},
              {"software_version", kSoftwareVersion}}}};
}

void write_curve_table(const StudyResult& r, const std::filesystem::path& path)
{
    auto out = open_table(path, "sd_of_sigma_g_vs_n");
    out << "param,n,method,sd_of_sd,sd_of_mean,mean_of_sd,mean_of_mean,valid_repeats,"
           "excluded_repeats\n";
    for (const auto& c : r.curves) {
        for (const auto& p : c.points) {
            for (const auto& [method, st] :
                 {std::pair<const char*, const EstimatorStats&>{"MLB", p.mlb},
                  std::pair<const char*, const EstimatorStats&>{"SSD", p.ssd}}) {
                out << c.param << ',' << p.n << ',' << method << ','
                    << format_double(st.sd_of_sd) << ',' << format_double(st.sd_of_mean) << ','
                    << format_double(st.mean_of_sd) << ',' << format_double(st.mean_of_mean)
                    << ',' << p.valid_repeats << ',' << p.excluded_repeats << '\n';
            }
        }
    }
}

void write_repeats_table(const StudyResult& r, const std::filesystem::path& path)
{
    auto out = open_table(path, "repeat_estimates");
    out << "n,repeat,param,mlb_mu_g,mlb_sigma_g,ssd_m_g,ssd_s_g\n";
    const auto names = r.spec.param_names();
    for (const auto& rep : r.repeats) {
        for (std::size_t i = 0; i < rep.repeat_index.size(); ++i) {
            for (std::size_t d = 0; d < names.size(); ++d) {
                const auto di = static_cast<Eigen::Index>(d);
                out << rep.n << ',' << rep.repeat_index[i] << ',' << names[d] << ','
                    << format_double(rep.mlb_mean[i](di)) << ','
                    << format_double(rep.mlb_sd[i](di)) << ','
                    << format_double(rep.ssd_mean[i](di)) << ','
                    << format_double(rep.ssd_sd[i](di)) << '\n';
            }
        }
    }
}

void write_required_n_table(const StudyResult& r, const std::filesystem::path& path)
{
    auto out = open_table(path, "required_n");
    out << "model,param_count,param,required_n,a,b,converged\n";
    const auto names = r.spec.param_names();
    for (std::size_t d = 0; d < r.stability.size(); ++d) {
        const auto& s = r.stability[d];
        out << r.spec.name() << ',' << r.spec.param_count() << ',' << names[d] << ','
            << (s.required_n ? std::to_string(*s.required_n) : "not-reached") << ','
            << format_double(s.slope) << ',' << format_double(s.intercept) << ','
            << (s.converged ? 1 : 0) << '\n';
    }
    out << r.spec.name() << ',' << r.spec.param_count() << ",*,"
        << (r.required_n_model ? std::to_string(*r.required_n_model) : "not-reached")
        << ",,,\n";
}

void write_histogram_table(const StudyResult& r, const std::filesystem::path& path, int bins)
{
    auto out = open_table(path, "sample_vs_population");
    out << "param,bin,bin_lo,bin_hi,count,sample_density,population_density\n";
    const auto names = r.spec.param_names();
    const std::size_t k = r.cell_summaries.size();
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    for (std::size_t d = 0; d < names.size(); ++d) {
        const auto di = static_cast<Eigen::Index>(d);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& s : r.cell_summaries) {
            lo = std::min(lo, s.mean(di));
            hi = std::max(hi, s.mean(di));
        }
        const double mu = r.full_sample.mean(di);
        const double sigma = r.full_sample.sd(di);
        lo = std::min(lo, mu - 3 * sigma);
        hi = std::max(hi, mu + 3 * sigma);
        if (!(hi > lo)) {
            lo -= 0.5;
            hi += 0.5;
        }
        const double width = (hi - lo) / bins;
        std::vector<int> counts(static_cast<std::size_t>(bins), 0);
        for (const auto& s : r.cell_summaries) {
            int b = static_cast<int>((s.mean(di) - lo) / width);
            counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))]++;
        }
        for (int b = 0; b < bins; ++b) {
            const double a = lo + b * width;
            const double c = a + 0.5 * width;
            const double z = sigma > 0 ? (c - mu) / sigma : 0.0;
            const double density =
                sigma > 0 ? kInvSqrt2Pi / sigma * std::exp(-0.5 * z * z) : 0.0;
            out << names[d] << ',' << b << ',' << format_double(a) << ','
                << format_double(a + width) << ',' << counts[static_cast<std::size_t>(b)] << ','
                << format_double(counts[static_cast<std::size_t>(b)] / (double(k) * width))
                << ',' << format_double(density) << '\n';
        }
    }
}

void write_single_draw_table(const ModelSpec& spec, std::span<const SingleDrawPoint> trace,
                             const std::filesystem::path& path)
{
    auto out = open_table(path, "single_draw");
    out << "n,param,mu_g,mu_g_sd,sigma_g,sigma_g_sd,band_lower,band_upper\n";
    const auto names = spec.param_names();
    for (const auto& pt : trace) {
        for (std::size_t d = 0; d < names.size(); ++d) {
            const auto di = static_cast<Eigen::Index>(d);
            out << pt.n << ',' << names[d] << ',' << format_double(pt.mean(di)) << ','
                << format_double(pt.mean_sd(di)) << ',' << format_double(pt.sd(di)) << ','
                << format_double(pt.sd_sd(di)) << ','
                << format_double(pt.mean(di) - pt.sd(di)) << ','
                << format_double(pt.mean(di) + pt.sd(di)) << '\n';
        }
    }
}

void write_json(const Json& j, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

Json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot read " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw DataError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

} // namespace cellvar
