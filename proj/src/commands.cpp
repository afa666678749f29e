#include "jblcsm/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "jblcsm/io.hpp"
#include "jblcsm/scores.hpp"

namespace jblcsm {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

ModelSpec RunConfig::spec() const
{
    ModelSpec s;
    if (model == "full")
        s.acceleration = Acceleration::random;
    else if (model == "reduced")
        s.acceleration = Acceleration::fixed;
    else
        throw InputError("model must be full or reduced, got '" + model + "'");
    if (expression == "midpoint")
        s.expression = Expression::midpoint;
    else if (expression == "endpoint")
        s.expression = Expression::right_endpoint;
    else
        throw InputError("expression must be midpoint or endpoint, got '" + expression + "'");
    if (framework == "lcsm")
        s.framework = Framework::lcsm;
    else if (framework == "lgc")
        s.framework = Framework::lgc;
    else
        throw InputError("framework must be lcsm or lgc, got '" + framework + "'");
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
    return s;
}

FitConfig RunConfig::fit_config() const
{
    if (restarts < 1 || max_iterations < 1)
        throw InputError("restarts must be >= 1 and max_iterations >= 1");
    FitConfig f;
    f.max_restarts = restarts;
    f.max_iterations = max_iterations;
    f.seed = seed;
    return f;
}

void to_json(nlohmann::json& j, const RunConfig& c)
{
    j = nlohmann::json{{"command", c.command},
                       {"data", c.data},
                       {"fit", c.fit_file},
                       {"model", c.model},
                       {"expression", c.expression},
                       {"framework", c.framework},
                       {"seed", c.seed},
                       {"reps", c.reps},
                       {"conditions", c.conditions},
                       {"out", c.out},
                       {"grid", c.grid},
                       {"threads", c.threads},
                       {"restarts", c.restarts},
                       {"max_iterations", c.max_iterations},
                       {"dry_run", c.dry_run},
                       {"export_data", c.export_data}};
}

void merge_config(RunConfig& c, const nlohmann::json& j)
{
    if (!j.is_object())
        throw InputError("config file must contain a JSON object");
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "command")
                c.command = v.get<std::string>();
            else if (key == "data")
                c.data = v.get<std::string>();
            else if (key == "fit")
                c.fit_file = v.get<std::string>();
            else if (key == "model")
                c.model = v.get<std::string>();
            else if (key == "expression")
                c.expression = v.get<std::string>();
            else if (key == "framework")
                c.framework = v.get<std::string>();
            else if (key == "seed")
                c.seed = v.get<std::uint64_t>();
            else if (key == "reps")
                c.reps = v.get<std::size_t>();
            else if (key == "conditions")
                c.conditions = v.is_string() ? v.get<std::string>() : v.dump();
            else if (key == "out")
                c.out = v.get<std::string>();
            else if (key == "grid")
                c.grid = v.get<std::string>();
            else if (key == "threads")
                c.threads = v.get<unsigned>();
            else if (key == "restarts")
                c.restarts = v.get<int>();
            else if (key == "max_iterations")
                c.max_iterations = v.get<int>();
            else if (key == "dry_run")
                c.dry_run = v.get<bool>();
            else if (key == "export_data")
                c.export_data = v.get<bool>();
            else
                throw InputError("unknown config key '" + key + "'");
        } catch (const nlohmann::json::exception& e) {
            throw InputError("config key '" + key + "': " + e.what());
        }
    }
    // A JSON array of indices arrives as "[0,1]"; normalise to the flag syntax.
    if (!c.conditions.empty() && c.conditions.front() == '[') {
        std::string s = c.conditions.substr(1, c.conditions.size() - 2);
        s.erase(std::remove(s.begin(), s.end(), ' '), s.end());
        c.conditions = s;
    }
}

RunConfig load_config_file(const fs::path& path, RunConfig base)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError("config " + path.string() + ": " + e.what());
    }
    merge_config(base, j);
    return base;
}

nlohmann::json result_relevant_config(const RunConfig& c)
{
    nlohmann::json j = c;
    j.erase("out");
    j.erase("threads");
    j.erase("data");
    j.erase("fit");
    return j;
}

std::string config_hash(const RunConfig& c) { return fnv1a_hex(result_relevant_config(c).dump()); }

std::vector<int> parse_condition_filter(const std::string& text, int count)
{
    std::vector<int> out;
    if (text == "all" || text.empty()) {
        for (int i = 0; i < count; ++i)
            out.push_back(i);
        return out;
    }
    const auto parse_int = [&](std::string_view s) {
        const auto v = parse_number(s);
        if (!v || *v != std::floor(*v) || *v < 0 || *v >= count)
            throw InputError("invalid condition index '" + std::string(s) + "' (valid: 0.." +
                             std::to_string(count - 1) + ")");
        return static_cast<int>(*v);
    };
    for (const std::string& part : split_csv_line(text)) {
        const auto dash = part.find('-');
        if (dash == std::string::npos) {
            out.push_back(parse_int(part));
            continue;
        }
        const int a = parse_int(std::string_view(part).substr(0, dash));
        const int b = parse_int(std::string_view(part).substr(dash + 1));
        if (b < a)
            throw InputError("empty condition range '" + part + "'");
        for (int i = a; i <= b; ++i)
            out.push_back(i);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Eigen::VectorXd parse_time_grid(const std::string& text)
{
    std::vector<double> v;
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ':');)
            parts.push_back(p);
        if (parts.size() != 3)
            throw InputError("grid must be start:stop:step");
        const auto a = parse_number(parts[0]), b = parse_number(parts[1]), h = parse_number(parts[2]);
        if (!a || !b || !h || !(*h > 0) || !(*b >= *a) || !std::isfinite(*a) || !std::isfinite(*b))
            throw InputError("invalid grid '" + text + "'");
        const auto steps = static_cast<long>(std::floor((*b - *a) / *h + 1e-9));
        if (steps > 1000000)
            throw InputError("grid has too many points");
        for (long k = 0; k <= steps; ++k)
            v.push_back(*a + static_cast<double>(k) * *h);
    } else {
        for (const std::string& p : split_csv_line(text)) {
            const auto x = parse_number(p);
            if (!x || !std::isfinite(*x))
                throw InputError("invalid grid time '" + p + "'");
            v.push_back(*x);
        }
    }
    if (v.empty())
        throw InputError("empty time grid");
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// ---------------------------------------------------------------------------
// Fit serialisation

namespace {

std::string status_name(FitStatus s) { return s == FitStatus::converged ? "converged" : "failed_after_restarts"; }

void write_resolved_config(const RunConfig& c)
{
    const nlohmann::json j = c;
    write_text_file(fs::path(c.out) / "resolved_config.json", j.dump(2) + "\n");
}

Dataset load_data(const RunConfig& c)
{
    if (c.data.empty())
        throw InputError("--data is required");
    Dataset d = ingest_csv(c.data);
    try {
        d.validate();
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
    std::cerr << "read " << d.size() << " individuals with " << d.waves() << " waves from " << c.data << "\n";
    return d;
}

std::pair<double, double> time_range(const Dataset& d)
{
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& ind : d.individuals) {
        lo = std::min(lo, ind.schedule[0]);
        hi = std::max(hi, ind.schedule[ind.schedule.waves() - 1]);
    }
    return {lo, hi};
}

std::string estimates_csv(const FitResult& r)
{
    const auto names = parameter_names(r.spec);
    const Eigen::VectorXd est = pack_parameters(r.estimates, r.spec);
    std::string s = "parameter,estimate,se,p_value\n";
    for (std::size_t k = 0; k < names.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        const double se = r.se.size() == est.size() ? r.se(i) : NAN;
        s += names[k] + "," + format_number(est(i)) + "," + format_number(se) + "," +
             format_number(wald_p_value(est(i), se)) + "\n";
    }
    return s;
}

struct FittedModel {
    FitResult result;
    std::optional<std::pair<double, double>> times;
};

/// Estimates from --fit, or a fresh fit of --data written alongside the outputs.
FittedModel obtain_fit(const RunConfig& c, const Dataset* data, int& exit_code)
{
    FittedModel fm;
    exit_code = exit_ok;
    if (!c.fit_file.empty()) {
        fm.result = read_fit_json(c.fit_file);
        std::ifstream in(c.fit_file);
        const auto j = nlohmann::json::parse(in);
        if (j.contains("time_range"))
            fm.times = {j["time_range"][0].get<double>(), j["time_range"][1].get<double>()};
        if (data)
            fm.times = time_range(*data);
        return fm;
    }
    if (!data)
        throw InputError("either --fit or --data is required");
    fm.result = fit(*data, c.spec(), c.fit_config());
    fm.times = time_range(*data);
    auto j = fit_to_json(fm.result);
    j["time_range"] = {fm.times->first, fm.times->second};
    write_text_file(fs::path(c.out) / "fit.json", j.dump(2) + "\n");
    write_text_file(fs::path(c.out) / "estimates.csv", estimates_csv(fm.result));
    if (!fm.result.converged())
        exit_code = exit_convergence_failure;
    return fm;
}

} // namespace

nlohmann::json fit_to_json(const FitResult& r)
{
    const auto names = parameter_names(r.spec);
    const Eigen::VectorXd est = pack_parameters(r.estimates, r.spec);
    ojson estimates = ojson::object(), se = ojson::object();
    for (std::size_t k = 0; k < names.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        estimates[names[k]] = est(i);
        const double s = r.se.size() == est.size() ? r.se(i) : NAN;
        se[names[k]] = std::isfinite(s) ? ojson(s) : ojson(nullptr);
    }
    ojson j;
    j["model"] = to_string(r.spec.acceleration);
    j["expression"] = to_string(r.spec.expression);
    j["framework"] = to_string(r.spec.framework);
    j["status"] = status_name(r.status);
    j["n"] = r.n;
    j["n_params"] = r.n_params;
    j["loglik"] = r.loglik;
    j["minus2ll"] = r.minus2ll();
    j["aic"] = r.aic;
    j["bic"] = r.bic;
    j["iterations"] = r.iterations;
    j["attempts"] = r.attempts;
    j["se_available"] = r.se_available;
    j["improper"] = {{"negative_factor_variance", r.improper.negative_factor_variance},
                     {"out_of_range_correlation", r.improper.out_of_range_correlation},
                     {"negative_gamma_variance", r.improper.negative_gamma_variance},
                     {"gamma_correlation_out_of_range", r.improper.gamma_correlation_out_of_range}};
    j["estimates"] = estimates;
    j["se"] = se;
    return nlohmann::json::parse(j.dump());
}

FitResult read_fit_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open " + path.string());
    try {
        const nlohmann::json j = nlohmann::json::parse(in);
        RunConfig c;
        c.model = j.at("model").get<std::string>();
        c.expression = j.at("expression").get<std::string>();
        c.framework = j.at("framework").get<std::string>();
        FitResult r;
        r.spec = c.spec();
        const auto names = parameter_names(r.spec);
        Eigen::VectorXd v(static_cast<Eigen::Index>(names.size()));
        r.se = Eigen::VectorXd::Constant(v.size(), NAN);
        for (std::size_t k = 0; k < names.size(); ++k) {
            v(static_cast<Eigen::Index>(k)) = j.at("estimates").at(names[k]).get<double>();
            const auto& s = j.at("se").at(names[k]);
            if (!s.is_null())
                r.se(static_cast<Eigen::Index>(k)) = s.get<double>();
        }
        r.estimates = unpack_parameters(v, r.spec);
        r.status = j.at("status").get<std::string>() == "converged" ? FitStatus::converged
                                                                     : FitStatus::failed_after_restarts;
        r.loglik = j.at("loglik").get<double>();
        r.n = j.at("n").get<std::size_t>();
        r.n_params = j.at("n_params").get<int>();
        r.aic = j.at("aic").get<double>();
        r.bic = j.at("bic").get<double>();
        r.se_available = j.at("se_available").get<bool>();
        r.improper = detect_improper(r.estimates);
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Commands

int cmd_fit(const RunConfig& c)
{
    write_resolved_config(c);
    const Dataset data = load_data(c);
    int code = exit_ok;
    RunConfig fresh = c;
    fresh.fit_file.clear();
    const FittedModel fm = obtain_fit(fresh, &data, code);
    const FitResult& r = fm.result;
    std::cerr << describe(r.spec) << ": " << status_name(r.status) << ", -2ll " << r.minus2ll() << ", AIC " << r.aic
              << ", BIC " << r.bic << "\n";
    return code;
}

int cmd_scores(const RunConfig& c)
{
    write_resolved_config(c);
    const Dataset data = load_data(c);
    int code = exit_ok;
    const FittedModel fm = obtain_fit(c, &data, code);
    if (code != exit_ok)
        return code;
    const FitResult& r = fm.result;
    if (r.estimates.reduced != r.spec.reduced())
        throw InputError("estimates do not match the model in the fit file");

    std::string fs_csv = "id,variable,value,ok\n";
    std::string rate_csv = "id,time,rate,ok\n";
    static const char* factor_names[] = {"eta0", "eta1", "eta2", "gamma"};
    std::size_t failures = 0;
    for (const auto& ind : data.individuals) {
        const LatentVariableSet s = score_individual(ind, r.estimates, r.spec);
        const std::string ok = s.ok ? "1" : "0";
        failures += s.ok ? 0 : 1;
        for (int k = 0; k < 4; ++k)
            fs_csv += ind.id + "," + factor_names[k] + "," + format_number(s.growth_factors(k)) + "," + ok + "\n";
        for (Eigen::Index j = 0; j < s.true_scores.size(); ++j)
            fs_csv += ind.id + ",ly" + std::to_string(j + 1) + "," + format_number(s.true_scores(j)) + "," + ok + "\n";
        for (Eigen::Index j = 0; j < s.rates.size(); ++j)
            fs_csv += ind.id + ",dy" + std::to_string(j + 2) + "," + format_number(s.rates(j)) + "," + ok + "\n";
        const Eigen::VectorXd te = rate_evaluation_times(ind.schedule, r.spec.expression);
        for (Eigen::Index j = 0; j < s.rates.size(); ++j)
            rate_csv += ind.id + "," + format_number(te(j)) + "," + format_number(s.rates(j)) + "," + ok + "\n";
    }
    write_text_file(fs::path(c.out) / "factor_scores.csv", fs_csv);
    write_text_file(fs::path(c.out) / "rates_individual.csv", rate_csv);
    if (failures)
        std::cerr << failures << " individuals could not be scored (flagged ok=0)\n";
    return exit_ok;
}

int cmd_rates(const RunConfig& c)
{
    write_resolved_config(c);
    std::optional<Dataset> data;
    if (!c.data.empty())
        data = load_data(c);
    int code = exit_ok;
    const FittedModel fm = obtain_fit(c, data ? &*data : nullptr, code);
    if (code != exit_ok)
        return code;

    Eigen::VectorXd grid;
    if (!c.grid.empty()) {
        grid = parse_time_grid(c.grid);
    } else {
        if (!fm.times)
            throw InputError("--grid is required when the fit file carries no time range");
        grid = parse_time_grid(format_number(fm.times->first) + ":" + format_number(fm.times->second) + ":0.25");
    }
    const RateBand band = mean_rate_band(fm.result.estimates, grid);
    std::string s = "time,mean_rate,lower95,upper95\n";
    for (Eigen::Index k = 0; k < grid.size(); ++k)
        s += format_number(band.times(k)) + "," + format_number(band.mean(k)) + "," + format_number(band.lower(k)) +
             "," + format_number(band.upper(k)) + "\n";
    write_text_file(fs::path(c.out) / "rates_mean.csv", s);
    return exit_ok;
}

namespace {

ojson condition_json(const SimulationCondition& cond)
{
    return {{"id", cond.id},
            {"name", cond.name()},
            {"waves", to_string(cond.waves)},
            {"n", cond.n},
            {"slope_mean", cond.slope_mean},
            {"slope_sd", cond.slope_sd},
            {"sd_gamma", cond.sd_gamma},
            {"theta_eps", cond.theta_eps},
            {"delta", cond.delta}};
}

std::string metrics_csv(const ConditionResult& res)
{
    std::string s = "model,parameter,truth,scale,bias,empirical_se,rmse,coverage,mc_se_bias,replications\n";
    for (const MetricSummary& m : res.summaries)
        for (const ParameterMetrics& p : m.parameters)
            s += model_label(m.spec) + "," + p.name + "," + format_number(p.truth) + "," +
                 (p.relative ? "relative" : "absolute") + "," + format_number(p.bias) + "," +
                 format_number(p.empirical_se) + "," + format_number(p.rmse) + "," + format_number(p.coverage) + "," +
                 format_number(p.mc_se_bias) + "," + std::to_string(p.replications) + "\n";
    return s;
}

std::string tally_csv(const ConditionResult& res)
{
    std::string s = "model,tally,negative_gamma_variance,gamma_correlation_out_of_range,retained,attempts\n";
    for (std::size_t m = 0; m < res.models.size(); ++m)
        s += model_label(res.models[m]) + "," + res.tallies[m].format() + "," +
             std::to_string(res.tallies[m].negative_gamma_variance) + "," +
             std::to_string(res.tallies[m].gamma_correlation_out_of_range) + "," +
             std::to_string(res.retained[m].size()) + "," + std::to_string(res.attempts) + "\n";
    return s;
}

ojson condition_manifest(const RunConfig& c, const ConditionResult& res)
{
    ojson models = ojson::array();
    for (std::size_t m = 0; m < res.models.size(); ++m) {
        std::size_t converged = 0, substituted = 0;
        ojson failed = ojson::array();
        for (const auto& rec : res.records) {
            if (rec.fits[m].converged())
                ++converged;
            else
                failed.push_back({{"attempt", rec.attempt}, {"seed", rec.seed}});
            substituted += rec.substituted[m] ? 1 : 0;
        }
        models.push_back({{"model", model_label(res.models[m])},
                          {"retained", res.retained[m].size()},
                          {"converged", converged},
                          {"convergence_rate", res.attempts ? double(converged) / double(res.attempts) : 0.0},
                          {"substituted", substituted},
                          {"failed_attempts", failed}});
    }
    return {{"seed", c.seed},     {"S", c.reps},          {"config_hash", config_hash(c)},
            {"condition", condition_json(res.condition)}, {"attempts", res.attempts},
            {"aborted", res.aborted}, {"models", models}};
}

double median_of(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string summary_csv(const std::vector<ConditionResult>& results)
{
    // (metric, model, parameter, scale) -> values across conditions, in first-seen order
    std::vector<std::array<std::string, 4>> keys;
    std::map<std::array<std::string, 4>, std::vector<double>> values;
    for (const auto& res : results)
        for (const auto& m : res.summaries)
            for (const auto& p : m.parameters) {
                const std::pair<const char*, double> items[] = {{"bias", p.bias},
                                                                {"empirical_se", p.empirical_se},
                                                                {"rmse", p.rmse},
                                                                {"coverage", p.coverage}};
                for (const auto& [metric, v] : items) {
                    std::array<std::string, 4> k{metric, model_label(m.spec), p.name,
                                                 p.relative ? "relative" : "absolute"};
                    if (!values.count(k))
                        keys.push_back(k);
                    if (std::isfinite(v))
                        values[k].push_back(v);
                }
            }
    std::string s = "metric,model,parameter,scale,median,min,max,conditions\n";
    for (const auto& k : keys) {
        const auto& v = values[k];
        s += k[0] + "," + k[1] + "," + k[2] + "," + k[3] + ",";
        if (v.empty()) {
            s += "nan,nan,nan,0\n";
            continue;
        }
        s += format_number(median_of(v)) + "," + format_number(*std::min_element(v.begin(), v.end())) + "," +
             format_number(*std::max_element(v.begin(), v.end())) + "," + std::to_string(v.size()) + "\n";
    }
    return s;
}

} // namespace

int cmd_simulate(const RunConfig& c)
{
    if (c.reps < 1)
        throw InputError("--reps must be at least 1");
    const auto grid = condition_grid();
    const auto selected = parse_condition_filter(c.conditions, static_cast<int>(grid.size()));
    write_resolved_config(c);

    RunOptions opt;
    opt.master_seed = c.seed;
    opt.threads = c.threads ? c.threads : default_threads();
    opt.fit = c.fit_config();
    const auto models = simulation_models();

    std::vector<ConditionResult> results;
    ojson top_conditions = ojson::array();
    bool any_aborted = false;
    for (int idx : selected) {
        const SimulationCondition& cond = grid[static_cast<std::size_t>(idx)];
        const fs::path dir = fs::path(c.out) / cond.name();
        fs::create_directories(dir);
        if (c.export_data) {
            std::ostringstream os;
            write_wide_csv(os, replication_dataset(cond, c.seed, 0).data);
            write_text_file(dir / "data.csv", os.str());
        }
        if (c.dry_run) {
            ojson m = {{"seed", c.seed},
                       {"S", c.reps},
                       {"config_hash", config_hash(c)},
                       {"condition", condition_json(cond)},
                       {"dry_run", true}};
            write_text_file(dir / "manifest.json", m.dump(2) + "\n");
            top_conditions.push_back({{"id", cond.id}, {"name", cond.name()}});
            continue;
        }
        std::cerr << "condition " << cond.name() << " (S=" << c.reps << ")\n";
        ConditionResult res = run_condition(cond, c.reps, models, opt);
        if (res.aborted) {
            any_aborted = true;
            std::cerr << "  aborted by pathology guard after " << res.attempts << " attempts\n";
        }
        write_text_file(dir / ("metrics_" + cond.name() + ".csv"), metrics_csv(res));
        write_text_file(dir / "improper_tally.csv", tally_csv(res));
        write_text_file(dir / "manifest.json", condition_manifest(c, res).dump(2) + "\n");
        top_conditions.push_back(
            {{"id", cond.id}, {"name", cond.name()}, {"attempts", res.attempts}, {"aborted", res.aborted}});
        results.push_back(std::move(res));
    }
    if (!c.dry_run)
        write_text_file(fs::path(c.out) / "summary.csv", summary_csv(results));
    const ojson manifest = {{"seed", c.seed},
                            {"S", c.reps},
                            {"config_hash", config_hash(c)},
                            {"dry_run", c.dry_run},
                            {"conditions", top_conditions}};
    write_text_file(fs::path(c.out) / "manifest.json", manifest.dump(2) + "\n");
    return any_aborted ? exit_pathology : exit_ok;
}

int run_command(const RunConfig& c)
{
    try {
        if (c.command == "fit")
            return cmd_fit(c);
        if (c.command == "scores")
            return cmd_scores(c);
        if (c.command == "rates")
            return cmd_rates(c);
        if (c.command == "simulate")
            return cmd_simulate(c);
        throw InputError("unknown command '" + c.command + "'");
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return exit_input_error;
    } catch (const std::invalid_argument& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return exit_input_error;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return exit_input_error;
    } catch (const DivergentCurve& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return exit_input_error;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return exit_pathology;
    }
}

} // namespace jblcsm
