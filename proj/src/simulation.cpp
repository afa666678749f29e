#include "jblcsm/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "jblcsm/model_core.hpp"

namespace jblcsm {

Eigen::VectorXd wave_times(WaveDesign design)
{
    switch (design) {
    case WaveDesign::seven_equal:
        return (Eigen::VectorXd(7) << 0, 1.5, 3, 4.5, 6, 7.5, 9).finished();
    case WaveDesign::ten_equal:
        return Eigen::VectorXd::LinSpaced(10, 0, 9);
    case WaveDesign::ten_unequal:
        return (Eigen::VectorXd(10) << 0, 0.75, 1.5, 2.25, 3, 3.75, 4.5, 6, 7.5, 9).finished();
    }
    throw std::invalid_argument("unknown wave design");
}

std::string to_string(WaveDesign design)
{
    switch (design) {
    case WaveDesign::seven_equal:
        return "seven_equal";
    case WaveDesign::ten_equal:
        return "ten_equal";
    case WaveDesign::ten_unequal:
        return "ten_unequal";
    }
    return "unknown";
}

std::string SimulationCondition::name() const
{
    char buf[128];
    std::snprintf(buf, sizeof buf, "c%02d_%s_n%d_slope%.1f_sdg%.2f_te%g", id, to_string(waves).c_str(), n,
                  slope_mean, sd_gamma, theta_eps);
    return buf;
}

PopulationParameters SimulationCondition::truth() const
{
    PopulationParameters p;
    p.mean << mu_eta0, slope_mean, mu_eta2, mu_gamma;
    const Eigen::Vector4d sd(std::sqrt(psi00), slope_sd, std::sqrt(psi22), sd_gamma);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            p.covariance(r, c) = (r == c ? 1.0 : rho) * sd(r) * sd(c);
    p.residual_variance = theta_eps;
    return p;
}

Eigen::VectorXd SimulationCondition::truth_vector(const ModelSpec& spec) const
{
    PopulationParameters p = truth();
    if (spec.reduced()) {
        p.reduced = true;
        p.covariance.row(3).setZero();
        p.covariance.col(3).setZero();
    }
    return pack_parameters(p, spec);
}

void SimulationCondition::validate() const
{
    const Eigen::VectorXd t = wave_times(waves);
    double min_gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 1; j < t.size(); ++j)
        min_gap = std::min(min_gap, t(j) - t(j - 1));
    if (!(delta >= 0.0) || !(delta < 0.5 * min_gap))
        throw std::invalid_argument("occasion windows overlap");
    if (n < 1 || !(theta_eps > 0.0) || !(sd_gamma >= 0.0) || !(slope_sd >= 0.0))
        throw std::invalid_argument("invalid simulation condition " + name());
}

std::vector<SimulationCondition> condition_grid()
{
    std::vector<SimulationCondition> grid;
    int id = 0;
    for (WaveDesign w : {WaveDesign::seven_equal, WaveDesign::ten_equal, WaveDesign::ten_unequal})
        for (int n : {200, 500})
            for (auto [mean, sd] : {std::pair{2.5, 1.0}, std::pair{1.0, 0.4}})
                for (double sdg : {0.0, 0.05, 0.10})
                    for (double te : {1.0, 2.0}) {
                        SimulationCondition c;
                        c.id = id++;
                        c.waves = w;
                        c.n = n;
                        c.slope_mean = mean;
                        c.slope_sd = sd;
                        c.sd_gamma = sdg;
                        c.theta_eps = te;
                        grid.push_back(c);
                    }
    return grid;
}

// ---------------------------------------------------------------------------
// Generation

std::vector<GrowthFactorsd> generate_factors(const SimulationCondition& cond, Rng& rng)
{
    const PopulationParameters truth = cond.truth();
    const int q = cond.sd_gamma > 0.0 ? 4 : 3;
    const Eigen::MatrixXd cov = truth.covariance.topLeftCorner(q, q);
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::logic_error("generating covariance is not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();

    std::vector<GrowthFactorsd> out(static_cast<std::size_t>(cond.n));
    Eigen::VectorXd z(q);
    for (auto& f : out) {
        for (int k = 0; k < q; ++k)
            z(k) = rng.normal();
        const Eigen::VectorXd eta = truth.mean.head(q) + L * z;
        f = {eta(0), eta(1), eta(2), q == 4 ? eta(3) : cond.mu_gamma};
    }
    return out;
}

std::vector<Schedule> generate_schedules(const SimulationCondition& cond, Rng& rng)
{
    const Eigen::VectorXd waves = wave_times(cond.waves);
    std::vector<Schedule> out;
    out.reserve(static_cast<std::size_t>(cond.n));
    for (int i = 0; i < cond.n; ++i) {
        Eigen::VectorXd t = waves;
        for (Eigen::Index j = cond.jitter_first_wave ? 0 : 1; j < t.size(); ++j)
            t(j) += cond.delta * (2.0 * rng.uniform() - 1.0);
        out.emplace_back(std::move(t));
    }
    return out;
}

GeneratedData generate_dataset(const SimulationCondition& cond, Rng& rng)
{
    cond.validate();
    GeneratedData g;
    g.factors = generate_factors(cond, rng);
    std::vector<Schedule> schedules = generate_schedules(cond, rng);
    const double sd = std::sqrt(cond.theta_eps);
    g.data.individuals.reserve(g.factors.size());
    for (std::size_t i = 0; i < g.factors.size(); ++i) {
        const Schedule& s = schedules[i];
        Eigen::VectorXd y(s.waves());
        for (Eigen::Index j = 0; j < s.waves(); ++j)
            y(j) = jb_value(g.factors[i], s[j]) + sd * rng.normal();
        g.data.individuals.push_back({std::to_string(i + 1), std::move(y), s});
    }
    return g;
}

GeneratedData replication_dataset(const SimulationCondition& cond, std::uint64_t master_seed, std::size_t attempt)
{
    Rng rng(stream_seed(master_seed, static_cast<std::uint64_t>(cond.id), attempt));
    return generate_dataset(cond, rng);
}

// ---------------------------------------------------------------------------
// Models and metrics

std::vector<ModelSpec> simulation_models()
{
    return {
        {Expression::midpoint, Acceleration::random, Framework::lcsm},
        {Expression::midpoint, Acceleration::fixed, Framework::lcsm},
        {Expression::right_endpoint, Acceleration::random, Framework::lcsm},
        {Expression::right_endpoint, Acceleration::fixed, Framework::lcsm},
    };
}

std::string model_label(const ModelSpec& spec)
{
    std::string s = spec.framework == Framework::lgc ? "lgc" : (spec.expression == Expression::midpoint ? "proposed" : "existing");
    return s + "_" + to_string(spec.acceleration);
}

ParameterMetrics parameter_metrics(std::span<const double> est, std::span<const double> lower,
                                   std::span<const double> upper, double truth)
{
    ParameterMetrics m;
    m.truth = truth;
    m.relative = truth != 0.0;
    const std::size_t S = est.size();
    m.replications = S;
    if (S == 0)
        return m;
    const double Sd = static_cast<double>(S);
    double sum = 0.0, sq = 0.0;
    std::size_t covered = 0;
    for (std::size_t s = 0; s < S; ++s) {
        sum += est[s];
        sq += (est[s] - truth) * (est[s] - truth);
        if (lower[s] <= truth && truth <= upper[s])
            ++covered;
    }
    const double mean = sum / Sd;
    double dev = 0.0;
    for (double e : est)
        dev += (e - mean) * (e - mean);
    const double scale = m.relative ? truth : 1.0;
    m.bias = (mean - truth) / scale;
    m.empirical_se = S > 1 ? std::sqrt(dev / (Sd - 1.0)) : std::numeric_limits<double>::quiet_NaN();
    m.rmse = std::sqrt(sq / Sd) / std::abs(scale);
    m.coverage = static_cast<double>(covered) / Sd;
    m.mc_se_bias = m.empirical_se / std::sqrt(Sd);
    return m;
}

MetricSummary metrics(std::span<const ReplicationRecord> records, std::size_t model, const ModelSpec& spec,
                      const Eigen::VectorXd& truth)
{
    MetricSummary out;
    out.spec = spec;
    out.convergent = records.size();
    const auto names = parameter_names(spec);
    const std::size_t S = records.size();
    for (std::size_t k = 0; k < names.size(); ++k) {
        std::vector<double> est(S), lo(S), hi(S);
        for (std::size_t s = 0; s < S; ++s) {
            const FitResult& f = records[s].fits[model];
            est[s] = pack_parameters(f.estimates, spec)(static_cast<Eigen::Index>(k));
            const double se = f.se.size() > static_cast<Eigen::Index>(k) ? f.se(static_cast<Eigen::Index>(k))
                                                                          : std::numeric_limits<double>::quiet_NaN();
            if (std::isfinite(se)) {
                std::tie(lo[s], hi[s]) = wald_ci(est[s], se);
            } else {
                lo[s] = hi[s] = std::numeric_limits<double>::quiet_NaN();
            }
        }
        ParameterMetrics pm = parameter_metrics(est, lo, hi, truth(static_cast<Eigen::Index>(k)));
        pm.name = names[k];
        out.parameters.push_back(pm);
    }
    return out;
}

std::string ImproperTally::format() const
{
    return std::to_string(negative_gamma_variance) + "//" + std::to_string(gamma_correlation_out_of_range);
}

ImproperTally ImproperTally::parse(const std::string& text)
{
    const auto pos = text.find("//");
    if (pos == std::string::npos)
        throw std::invalid_argument("improper tally must look like a//b: " + text);
    const auto num = [&](const std::string& s) {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(s, &used);
        if (used != s.size())
            throw std::invalid_argument("improper tally must look like a//b: " + text);
        return static_cast<std::size_t>(v);
    };
    return {num(text.substr(0, pos)), num(text.substr(pos + 2))};
}

// ---------------------------------------------------------------------------
// Driver

namespace {

PopulationParameters embed_reduced(const PopulationParameters& reduced)
{
    PopulationParameters p = reduced;
    p.reduced = false;
    p.covariance.row(3).setZero();
    p.covariance.col(3).setZero();
    return p;
}

Eigen::VectorXd embed_reduced_se(const Eigen::VectorXd& se_reduced, const ModelSpec& full)
{
    const ModelSpec red{full.expression, Acceleration::fixed, full.framework};
    const auto rn = parameter_names(red);
    const auto fn = parameter_names(full);
    Eigen::VectorXd se = Eigen::VectorXd::Zero(full.free_parameters());
    for (std::size_t k = 0; k < fn.size(); ++k) {
        std::string name = fn[k] == "mu_gamma" ? "gamma" : fn[k];
        const auto it = std::find(rn.begin(), rn.end(), name);
        if (it != rn.end())
            se(static_cast<Eigen::Index>(k)) = se_reduced(it - rn.begin());
    }
    return se;
}

bool retainable(const FitResult& f)
{
    return f.converged() && !(f.spec.factors() == 4 && f.improper.any());
}

} // namespace

ReplicationRecord run_replication(const SimulationCondition& cond, std::span<const ModelSpec> models,
                                  std::size_t attempt, const RunOptions& options)
{
    ReplicationRecord rec;
    rec.attempt = attempt;
    rec.seed = stream_seed(options.master_seed, static_cast<std::uint64_t>(cond.id), attempt);
    const GeneratedData gen = replication_dataset(cond, options.master_seed, attempt);

    const std::size_t M = models.size();
    rec.fits.resize(M);
    rec.improper.resize(M);
    rec.substituted.assign(M, false);

    const auto fit_one = [&](std::size_t m, const std::optional<PopulationParameters>& start) {
        FitConfig cfg = options.fit;
        cfg.seed = stream_seed(rec.seed, m + 1, start ? 1 : 0);
        cfg.start = start;
        return fit(gen.data, models[m], cfg);
    };

    const auto counterpart = [&](std::size_t m) -> std::optional<std::size_t> {
        for (std::size_t k = 0; k < M; ++k)
            if (models[k].reduced() && models[k].expression == models[m].expression &&
                models[k].framework == models[m].framework)
                return k;
        return std::nullopt;
    };

    // Reduced models first so full fits can borrow their optimum as a start.
    for (std::size_t m = 0; m < M; ++m)
        if (models[m].reduced())
            rec.fits[m] = fit_one(m, std::nullopt);

    for (std::size_t m = 0; m < M; ++m) {
        if (models[m].reduced())
            continue;
        FitResult f = fit_one(m, std::nullopt);
        const auto r = counterpart(m);
        if (r && rec.fits[*r].converged() && (!f.converged() || f.loglik < rec.fits[*r].loglik - 1e-6)) {
            FitResult g = fit_one(m, embed_reduced(rec.fits[*r].estimates));
            if (g.converged() && (!f.converged() || g.loglik > f.loglik))
                f = std::move(g);
        }
        rec.improper[m] = f.improper;
        if (f.converged() && f.improper.any() && r && rec.fits[*r].converged()) {
            const FitResult& red = rec.fits[*r];
            f.estimates = embed_reduced(red.estimates);
            f.se = embed_reduced_se(red.se, models[m]);
            f.se_available = red.se_available;
            f.improper = detect_improper(f.estimates);
            rec.substituted[m] = true;
        }
        rec.fits[m] = std::move(f);
    }
    for (std::size_t m = 0; m < M; ++m)
        if (models[m].reduced())
            rec.improper[m] = rec.fits[m].improper;
    return rec;
}

ConditionResult run_condition(const SimulationCondition& cond, std::size_t S, std::span<const ModelSpec> models,
                              const RunOptions& options)
{
    if (S < 1)
        throw std::invalid_argument("S must be at least 1");
    cond.validate();
    ConditionResult res;
    res.condition = cond;
    res.models.assign(models.begin(), models.end());
    const std::size_t M = models.size();
    res.retained.assign(M, {});

    const unsigned threads = std::max(1u, options.threads);
    const std::size_t guard = static_cast<std::size_t>(options.pathology_factor) * S;
    std::size_t consecutive_failures = 0;
    std::size_t next = 0;

    const auto done = [&] {
        return std::all_of(res.retained.begin(), res.retained.end(), [&](const auto& r) { return r.size() >= S; });
    };

    while (!done() && !res.aborted) {
        std::vector<ReplicationRecord> batch(threads);
        if (threads == 1) {
            batch[0] = run_replication(cond, models, next, options);
        } else {
            std::vector<std::thread> pool;
            for (unsigned w = 0; w < threads; ++w)
                pool.emplace_back([&, w] { batch[w] = run_replication(cond, models, next + w, options); });
            for (auto& t : pool)
                t.join();
        }
        for (auto& rec : batch) {
            if (done() || res.aborted)
                break;
            ++res.attempts;
            bool any = false;
            const std::size_t idx = res.records.size();
            for (std::size_t m = 0; m < M; ++m) {
                if (retainable(rec.fits[m])) {
                    any = true;
                    if (res.retained[m].size() < S)
                        res.retained[m].push_back(idx);
                }
            }
            consecutive_failures = any ? 0 : consecutive_failures + 1;
            res.records.push_back(std::move(rec));
            if (consecutive_failures >= guard)
                res.aborted = true;
        }
        next += threads;
    }

    for (std::size_t m = 0; m < M; ++m) {
        std::vector<ReplicationRecord> kept;
        kept.reserve(res.retained[m].size());
        ImproperTally tally;
        for (std::size_t idx : res.retained[m]) {
            const ReplicationRecord& r = res.records[idx];
            kept.push_back(r);
            tally.negative_gamma_variance += r.improper[m].negative_gamma_variance ? 1 : 0;
            tally.gamma_correlation_out_of_range += r.improper[m].gamma_correlation_out_of_range ? 1 : 0;
        }
        MetricSummary summary = metrics(kept, m, models[m], cond.truth_vector(models[m]));
        summary.attempts = res.attempts;
        res.summaries.push_back(std::move(summary));
        res.tallies.push_back(tally);
    }
    return res;
}

unsigned default_threads()
{
    if (const char* env = std::getenv("JBLCSM_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0)
            return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace jblcsm
