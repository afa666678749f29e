// Acceptance suite: one PASS/FAIL line per criterion, detail lines indented.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "jblcsm/commands.hpp"
#include "jblcsm/io.hpp"
#include "jblcsm/scores.hpp"
#include "jblcsm/simulation.hpp"

using namespace jblcsm;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void detail(const std::string& s) { std::cout << "    " << s << "\n"; }

void verdict(int id, bool ok, const std::string& summary)
{
    failures += ok ? 0 : 1;
    std::cout << (ok ? "PASS" : "FAIL") << "  criterion " << id << ": " << summary << std::endl;
}

std::string fmt(const char* f, double a)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

const ModelSpec proposed_full{Expression::midpoint, Acceleration::random, Framework::lcsm};
const ModelSpec proposed_reduced{Expression::midpoint, Acceleration::fixed, Framework::lcsm};

const ParameterMetrics& metric(const MetricSummary& s, const std::string& name)
{
    for (const auto& p : s.parameters)
        if (p.name == name)
            return p;
    throw std::logic_error("no metric " + name);
}

std::size_t model_index(const ConditionResult& r, const ModelSpec& spec)
{
    for (std::size_t m = 0; m < r.models.size(); ++m)
        if (r.models[m] == spec)
            return m;
    throw std::logic_error("model not run");
}

SimulationCondition find_condition(WaveDesign w, int n, double slope, double sdg, double te)
{
    for (const auto& c : condition_grid())
        if (c.waves == w && c.n == n && c.slope_mean == slope && c.sd_gamma == sdg && c.theta_eps == te)
            return c;
    throw std::logic_error("condition not in grid");
}

// ---------------------------------------------------------------------------

double independent_mvn_logpdf(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, const Eigen::MatrixXd& S)
{
    const Eigen::Index k = y.size();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        double d = S(j, j);
        for (Eigen::Index m = 0; m < j; ++m)
            d -= L(j, m) * L(j, m);
        L(j, j) = std::sqrt(d);
        for (Eigen::Index i = j + 1; i < k; ++i) {
            double v = S(i, j);
            for (Eigen::Index m = 0; m < j; ++m)
                v -= L(i, m) * L(j, m);
            L(i, j) = v / L(j, j);
        }
    }
    Eigen::VectorXd z = y - mu;
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index m = 0; m < i; ++m)
            z(i) -= L(i, m) * z(m);
        z(i) /= L(i, i);
        logdet += std::log(L(i, i));
    }
    return -0.5 * static_cast<double>(k) * std::log(2.0 * std::numbers::pi) - logdet - 0.5 * z.squaredNorm();
}

void criterion1()
{
    const auto t0 = Clock::now();
    Rng rng(101);
    double worst = 0.0;
    const int Js[] = {3, 7, 10};
    for (int pair = 0; pair < 25; ++pair) {
        const int J = Js[pair % 3];
        SimulationCondition c;
        c.sd_gamma = rng.uniform(0.02, 0.15);
        c.theta_eps = rng.uniform(0.5, 2.0);
        PopulationParameters p = c.truth();
        p.mean(3) = rng.uniform(-1.0, -0.4);
        p.mean(2) = rng.uniform(-40, -20);
        const ModelSpec spec{pair % 2 ? Expression::midpoint : Expression::right_endpoint,
                             pair % 5 == 0 ? Acceleration::fixed : Acceleration::random, Framework::lcsm};
        if (spec.reduced()) {
            p.reduced = true;
            p.covariance.row(3).setZero();
            p.covariance.col(3).setZero();
        }
        Dataset d;
        for (int i = 0; i < 10; ++i) {
            Eigen::VectorXd t(J), y(J);
            t(0) = rng.uniform(-0.25, 0.25);
            for (int j = 1; j < J; ++j)
                t(j) = t(j - 1) + rng.uniform(0.5, 1.5);
            for (int j = 0; j < J; ++j)
                y(j) = 40 + 5 * t(j) + 4 * rng.normal();
            d.individuals.push_back({std::to_string(i), y, Schedule(t)});
        }
        double oracle = 0.0;
        for (const auto& ind : d.individuals) {
            const ImpliedMoments m = implied_moments(ind.schedule, p, spec);
            oracle += independent_mvn_logpdf(ind.y, m.mean, m.covariance);
        }
        worst = std::max(worst, std::abs(fiml_loglik(p, d, spec) - oracle));
    }
    const double secs = seconds_since(t0);
    detail("max |fiml - oracle| over 25 pairs = " + fmt("%.3e", worst) + ", runtime " + fmt("%.3f", secs) + " s");
    verdict(1, worst < 1e-10 && secs < 1.0, "likelihood oracle agreement to 1e-10");
}

void criterion2()
{
    const auto t0 = Clock::now();
    Rng rng(202);
    double worst = 0.0;
    for (int a = 0; a < 10; ++a) {
        const GrowthFactorsd f{rng.uniform(30, 70), rng.uniform(0, 5), rng.uniform(-40, -5), rng.uniform(-1.2, -0.2)};
        for (int b = 0; b < 10; ++b) {
            const double t = -2.0 + 14.0 * b / 9.0, h = 1e-6;
            const double fd = (jb_value(f, t + h) - jb_value(f, t - h)) / (2 * h);
            worst = std::max(worst, std::abs(jb_rate(f, t) - fd) / (1.0 + std::abs(jb_rate(f, t))));
        }
    }
    double rmin = INFINITY, rmax = -INFINITY;
    for (double ts : {0.5, 1.5, 3.0, 4.5, 7.5}) {
        Eigen::VectorXd t(1);
        t << ts;
        const Eigen::RowVectorXd row = rate_loadings_at<double>(t, -0.7, -30.0, false).row(0);
        const auto err = [&](double delta) {
            return std::abs(jb_rate(GrowthFactorsd{50, 2.5, -30, -0.7 + delta}, ts) -
                            row.dot(Eigen::Vector3d(2.5, -30, delta)));
        };
        const double ratio = err(0.02) / err(0.01);
        rmin = std::min(rmin, ratio);
        rmax = std::max(rmax, ratio);
    }
    const double secs = seconds_since(t0);
    detail("max relative rate/derivative gap = " + fmt("%.3e", worst) + "; halving ratios in [" + fmt("%.4f", rmin) +
           ", " + fmt("%.4f", rmax) + "], runtime " + fmt("%.3f", secs) + " s");
    verdict(2, worst < 1e-6 && rmin >= 3.5 && rmax <= 4.5 && secs < 1.0, "derivative and first-order expansion checks");
}

void criterion3()
{
    const auto t0 = Clock::now();
    SimulationCondition c = find_condition(WaveDesign::ten_equal, 500, 2.5, 0.0, 1.0);
    c.theta_eps = 1e-4;
    const GeneratedData g = replication_dataset(c, 303, 0);
    const FitResult r = fit(g.data, proposed_reduced);
    const auto names = parameter_names(proposed_reduced);
    const Eigen::VectorXd truth = c.truth_vector(proposed_reduced);
    const Eigen::VectorXd est = pack_parameters(r.estimates, proposed_reduced);
    double worst = 0.0;
    std::string worst_name;
    for (Eigen::Index k = 0; k < est.size(); ++k) {
        const double rel = std::abs(est(k) / truth(k) - 1.0);
        detail(names[static_cast<std::size_t>(k)] + ": estimate " + fmt("%.6g", est(k)) + ", generating " +
               fmt("%.6g", truth(k)) + ", relative error " + fmt("%.4f", rel));
        if (rel > worst) {
            worst = rel;
            worst_name = names[static_cast<std::size_t>(k)];
        }
    }
    const double secs = seconds_since(t0);

    // Informational: the same estimates against the realised factor moments.
    Eigen::MatrixXd F(static_cast<Eigen::Index>(g.factors.size()), 3);
    for (std::size_t i = 0; i < g.factors.size(); ++i)
        F.row(static_cast<Eigen::Index>(i)) << g.factors[i].eta0, g.factors[i].eta1, g.factors[i].eta2;
    const Eigen::RowVector3d fm = F.colwise().mean();
    const Eigen::MatrixXd centered = F.rowwise() - fm;
    const Eigen::Matrix3d fc = centered.transpose() * centered / static_cast<double>(F.rows());
    std::string info = "vs realised sample moments:";
    for (int k = 0; k < 3; ++k)
        info += " mu" + std::to_string(k) + " " + fmt("%+.4f", r.estimates.mean(k) / fm(k) - 1.0);
    for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b)
            info += " psi" + std::to_string(a) + std::to_string(b) + " " +
                    fmt("%+.4f", r.estimates.covariance(a, b) / fc(a, b) - 1.0);
    detail(info);
    detail("converged " + std::string(r.converged() ? "yes" : "no") + ", runtime " + fmt("%.2f", secs) + " s");
    verdict(3, r.converged() && worst < 0.01 && secs < 30.0,
            "noiseless reduced recovery within 1% (worst " + worst_name + " at " + fmt("%.4f", worst) + ")");
}

struct SimulationRuns {
    ConditionResult random_gamma; // sd(gamma) = 0.10
    ConditionResult fixed_gamma;  // sd(gamma) = 0
    double random_secs = 0.0, fixed_secs = 0.0;
};

SimulationRuns run_simulations()
{
    SimulationRuns s;
    RunOptions opt;
    opt.master_seed = 2024;
    opt.threads = default_threads();
    const auto models = simulation_models();
    auto t0 = Clock::now();
    s.random_gamma = run_condition(find_condition(WaveDesign::ten_equal, 500, 2.5, 0.10, 1.0), 100, models, opt);
    s.random_secs = seconds_since(t0);
    t0 = Clock::now();
    s.fixed_gamma = run_condition(find_condition(WaveDesign::ten_equal, 500, 2.5, 0.0, 1.0), 100, models, opt);
    s.fixed_secs = seconds_since(t0);
    return s;
}

void criterion4(const SimulationRuns& s)
{
    const ConditionResult& r = s.random_gamma;
    const MetricSummary& m = r.summaries[model_index(r, proposed_full)];
    bool ok = m.convergent == 100 && !r.aborted && s.random_secs < 900;
    for (const char* name : {"mu_eta0", "mu_eta1", "mu_gamma", "psi_00", "psi_11", "psi_22"}) {
        const ParameterMetrics& p = metric(m, name);
        const double limit = std::string(name).rfind("mu_", 0) == 0 ? 0.02 : 0.10;
        detail(std::string(name) + ": relative bias " + fmt("%+.4f", p.bias) + " (limit " + fmt("%.2f", limit) +
               "), MC SE " + fmt("%.4f", p.mc_se_bias / std::abs(p.truth)));
        ok = ok && std::abs(p.bias) < limit;
    }
    const double cov = metric(m, "mu_eta0").coverage;
    detail("coverage of mu_eta0 = " + fmt("%.2f", cov) + "; " + std::to_string(m.convergent) + " replications from " +
           std::to_string(r.attempts) + " attempts, runtime " + fmt("%.1f", s.random_secs) + " s");
    ok = ok && cov >= 0.89 && cov <= 0.99;
    verdict(4, ok, "desk-scale recovery of the proposed full model (S = 100)");
}

void criterion5(const SimulationRuns& s)
{
    const ConditionResult& r = s.random_gamma;
    const ModelSpec existing_full{Expression::right_endpoint, Acceleration::random, Framework::lcsm};
    const double proposed = metric(r.summaries[model_index(r, proposed_full)], "mu_eta2").bias;
    const double existing = metric(r.summaries[model_index(r, existing_full)], "mu_eta2").bias;
    detail("relative bias of mu_eta2: proposed " + fmt("%+.4f", proposed) + ", existing " + fmt("%+.4f", existing));
    verdict(5, existing > 0.25 && std::abs(proposed) < 0.05, "midpoint versus right-endpoint contrast on mu_eta2");
}

void criterion6(const SimulationRuns& s)
{
    const auto rate = [](const ConditionResult& r) {
        const std::size_t m = model_index(r, proposed_full);
        return static_cast<double>(r.tallies[m].negative_gamma_variance) / static_cast<double>(r.retained[m].size());
    };
    const double over = rate(s.fixed_gamma), right = rate(s.random_gamma);
    const std::size_t mf = model_index(s.fixed_gamma, proposed_full);
    detail("sd(gamma) = 0: tally " + s.fixed_gamma.tallies[mf].format() + ", negative psi_gg in " + fmt("%.2f", over) +
           " of " + std::to_string(s.fixed_gamma.retained[mf].size()) + " replications, runtime " +
           fmt("%.1f", s.fixed_secs) + " s");
    const std::size_t mr = model_index(s.random_gamma, proposed_full);
    detail("sd(gamma) = 0.10: tally " + s.random_gamma.tallies[mr].format() + ", negative psi_gg in " +
           fmt("%.2f", right));
    verdict(6, over > 0.25 && right < 0.05 && s.fixed_secs < 900 && !s.fixed_gamma.aborted,
            "improper-solution pattern of the over-specified full model");
}

void criterion7(const SimulationRuns& s)
{
    std::size_t pairs = 0, violations = 0;
    double worst = INFINITY;
    for (const ConditionResult* r : {&s.random_gamma, &s.fixed_gamma})
        for (const auto& rec : r->records)
            for (std::size_t m = 0; m < r->models.size(); ++m) {
                if (r->models[m].reduced())
                    continue;
                const ModelSpec red{r->models[m].expression, Acceleration::fixed, r->models[m].framework};
                const std::size_t k = model_index(*r, red);
                if (!rec.fits[m].converged() || !rec.fits[k].converged())
                    continue;
                ++pairs;
                const double gap = rec.fits[m].loglik - rec.fits[k].loglik;
                worst = std::min(worst, gap);
                violations += gap < -1e-6 ? 1 : 0;
            }
    const FitIndices full = fit_indices(26105, 15, 1000), red = fit_indices(26248, 11, 1000);
    const bool arithmetic = full.aic == 26135 && red.aic == 26270 && fit_indices(100, 0, 10).aic == 100 &&
                            std::abs(fit_indices(100, 4, 50).bic - (100 + 4 * std::log(50.0))) < 1e-12;
    bool consistent = true;
    for (const auto& rec : s.random_gamma.records)
        for (const auto& f : rec.fits)
            if (f.converged())
                consistent = consistent && std::abs(f.aic - (f.minus2ll() + 2 * f.n_params)) < 1e-9 &&
                             std::abs(f.bic - (f.minus2ll() + f.n_params * std::log(static_cast<double>(f.n)))) < 1e-9;
    detail(std::to_string(pairs) + " converged full/reduced pairs, min loglik gap " + fmt("%.3e", worst) + ", " +
           std::to_string(violations) + " violations");
    detail("AIC 26105 + 2*15 = " + fmt("%.0f", full.aic) + ", 26248 + 2*11 = " + fmt("%.0f", red.aic) +
           "; per-fit indices consistent: " + (consistent ? "yes" : "no"));
    verdict(7, pairs > 0 && violations == 0 && arithmetic && consistent, "nesting and information criteria");
}

void criterion8(const SimulationRuns& s)
{
    const ConditionResult& r = s.random_gamma;
    const std::size_t m = model_index(r, proposed_full);
    std::size_t shrink_fail = 0, checked = 0;
    double worst_tele = 0.0, min_corr = INFINITY;
    for (std::size_t idx : r.retained[m]) {
        const ReplicationRecord& rec = r.records[idx];
        const GeneratedData g = replication_dataset(r.condition, 2024, rec.attempt);
        const FitResult& f = rec.fits[m];
        const auto scores = factor_scores(g.data, f);
        const Eigen::Index n = static_cast<Eigen::Index>(scores.size());
        Eigen::MatrixXd S(n, 4);
        Eigen::VectorXd truth0(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& sc = scores[static_cast<std::size_t>(i)];
            S.row(i) = sc.growth_factors.transpose();
            truth0(i) = g.factors[static_cast<std::size_t>(i)].eta0;
            const Schedule& sch = g.data.individuals[static_cast<std::size_t>(i)].schedule;
            for (Eigen::Index j = 1; j < sch.waves(); ++j)
                worst_tele = std::max(worst_tele, std::abs(sc.true_scores(j) - sc.true_scores(j - 1) -
                                                           sc.rates(j - 1) * (sch[j] - sch[j - 1])));
        }
        const int q = f.spec.factors();
        const bool substituted = rec.substituted[m];
        for (int k = 0; k < (substituted ? 3 : q); ++k) {
            const Eigen::VectorXd col = S.col(k).array() - S.col(k).mean();
            ++checked;
            shrink_fail += col.squaredNorm() / static_cast<double>(n - 1) <= f.estimates.covariance(k, k) ? 0 : 1;
        }
        const Eigen::VectorXd a = S.col(0).array() - S.col(0).mean(), b = truth0.array() - truth0.mean();
        min_corr = std::min(min_corr, a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm()));
    }
    detail(std::to_string(checked) + " factor variances checked, " + std::to_string(shrink_fail) +
           " shrinkage violations; max telescoping gap " + fmt("%.3e", worst_tele) + "; min corr(eta0 score, eta0) " +
           fmt("%.4f", min_corr));
    verdict(8, checked > 0 && shrink_fail == 0 && worst_tele < 1e-10 && min_corr > 0.9, "factor-score properties");
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(JBLCSM_CLI_PATH) + " " + args + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Every file below `root`, keyed by relative path; resolved_config.json files
/// are skipped since they record the output directory itself.
std::map<std::string, std::string> tree(const fs::path& root)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().filename() != "resolved_config.json")
            out[fs::relative(e.path(), root).string()] = slurp(e.path());
    return out;
}

bool strict_reparse(const fs::path& file, std::size_t& cells)
{
    const CsvTable t = read_csv_file(file);
    const std::set<std::string> text{"model", "parameter", "scale", "tally", "metric"};
    for (const auto& row : t.rows)
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (text.count(t.header[k])) {
                if (t.header[k] == "tally")
                    ImproperTally::parse(row[k]);
                continue;
            }
            if (!parse_number(row[k]))
                return false;
            ++cells;
        }
    return true;
}

void criterion9()
{
    const auto t0 = Clock::now();
    const fs::path base = fs::temp_directory_path() / ("jblcsm_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(base);
    const int e1 = run_cli("simulate --reps 1 --seed 7 --out " + (base / "a").string());
    const int e2 = run_cli("simulate --reps 1 --seed 7 --out " + (base / "b").string());
    const auto ta = tree(base / "a"), tb = tree(base / "b");
    const bool identical = e1 == 0 && e2 == 0 && !ta.empty() && ta == tb;

    std::size_t csvs = 0, cells = 0;
    bool parsed = true;
    for (const auto& [rel, content] : ta)
        if (rel.size() > 4 && rel.substr(rel.size() - 4) == ".csv") {
            ++csvs;
            try {
                parsed = parsed && strict_reparse(base / "a" / rel, cells);
            } catch (const std::exception&) {
                parsed = false;
            }
        }
    int dirs = 0;
    for (const auto& e : fs::directory_iterator(base / "a"))
        dirs += e.is_directory() ? 1 : 0;
    const std::size_t grid = condition_grid().size();
    const bool dry = run_cli("simulate --dry-run --out " + (base / "dry").string()) == 0;
    int dry_dirs = 0;
    if (dry)
        for (const auto& e : fs::directory_iterator(base / "dry"))
            dry_dirs += e.is_directory() ? 1 : 0;
    detail("two runs: exit codes " + std::to_string(e1) + "/" + std::to_string(e2) + ", " + std::to_string(ta.size()) +
           " files compared, identical: " + (identical ? "yes" : "no"));
    detail(std::to_string(csvs) + " CSV files, " + std::to_string(cells) + " numeric cells re-parsed strictly: " +
           (parsed ? "ok" : "failed"));
    detail("condition grid size " + std::to_string(grid) + ", condition directories " + std::to_string(dirs) +
           " (dry run " + std::to_string(dry_dirs) + "), runtime " + fmt("%.1f", seconds_since(t0)) + " s");
    fs::remove_all(base);
    verdict(9, identical && parsed && csvs > 0 && grid == 72 && dirs == 72 && dry_dirs == 72,
            "determinism, strict CSV re-parse and 72-condition grid");
}

} // namespace

int main()
{
    std::cout << "acceptance suite (threads: " << default_threads() << ")" << std::endl;
    criterion1();
    criterion2();
    criterion3();
    std::cout << "    running simulation conditions for criteria 4-8 ..." << std::endl;
    const SimulationRuns runs = run_simulations();
    criterion4(runs);
    criterion5(runs);
    criterion6(runs);
    criterion7(runs);
    criterion8(runs);
    criterion9();
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion(s) failed")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
