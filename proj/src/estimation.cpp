#include "jblcsm/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "jblcsm/optimizer.hpp"
#include "jblcsm/rng.hpp"

namespace jblcsm {

std::string to_string(Expression e) { return e == Expression::midpoint ? "midpoint" : "endpoint"; }
std::string to_string(Acceleration a) { return a == Acceleration::random ? "full" : "reduced"; }
std::string to_string(Framework f) { return f == Framework::lcsm ? "lcsm" : "lgc"; }
std::string describe(const ModelSpec& s)
{
    return to_string(s.framework) + "/" + to_string(s.expression) + "/" + to_string(s.acceleration);
}

void Dataset::validate() const
{
    if (individuals.empty())
        throw std::invalid_argument("dataset is empty");
    const Eigen::Index J = waves();
    for (std::size_t i = 0; i < individuals.size(); ++i) {
        const auto& ind = individuals[i];
        if (ind.y.size() != J || ind.schedule.waves() != J)
            throw std::invalid_argument("individual " + ind.id + " has a different number of waves");
        if (!ind.y.allFinite())
            throw std::invalid_argument("individual " + ind.id + " has a non-finite outcome");
    }
}

// ---------------------------------------------------------------------------
// Parameter packing

namespace {

const char* const kMeanNames[] = {"mu_eta0", "mu_eta1", "mu_eta2", "mu_gamma"};
const char* const kFactorSuffix[] = {"0", "1", "2", "g"};

} // namespace

std::vector<std::string> parameter_names(const ModelSpec& spec)
{
    std::vector<std::string> names(kMeanNames, kMeanNames + 4);
    if (spec.reduced())
        names[3] = "gamma";
    const int q = spec.factors();
    for (int r = 0; r < q; ++r)
        for (int c = r; c < q; ++c)
            names.push_back(std::string("psi_") + kFactorSuffix[r] + kFactorSuffix[c]);
    names.emplace_back("theta_eps");
    return names;
}

Eigen::VectorXd pack_parameters(const PopulationParameters& p, const ModelSpec& spec)
{
    const int q = spec.factors();
    Eigen::VectorXd v(spec.free_parameters());
    v.head(4) = p.mean;
    Eigen::Index k = 4;
    for (int r = 0; r < q; ++r)
        for (int c = r; c < q; ++c)
            v(k++) = p.covariance(r, c);
    v(k) = p.residual_variance;
    return v;
}

PopulationParameters unpack_parameters(const Eigen::Ref<const Eigen::VectorXd>& v, const ModelSpec& spec)
{
    if (v.size() != spec.free_parameters())
        throw DimensionMismatch("parameter vector has wrong length for " + describe(spec));
    PopulationParameters p;
    p.reduced = spec.reduced();
    p.mean = v.head(4);
    const int q = spec.factors();
    Eigen::Index k = 4;
    for (int r = 0; r < q; ++r)
        for (int c = r; c < q; ++c) {
            p.covariance(r, c) = v(k);
            p.covariance(c, r) = v(k);
            ++k;
        }
    p.residual_variance = v(k);
    return p;
}

// ---------------------------------------------------------------------------
// Likelihood

std::optional<LoglikGradient> loglik_and_gradient(const Eigen::Ref<const Eigen::VectorXd>& params,
                                                  const Dataset& data, const ModelSpec& spec)
{
    const PopulationParameters p = unpack_parameters(params, spec);
    const double theta = p.residual_variance;
    if (!(theta > 0.0) || !params.allFinite())
        return std::nullopt;

    const int q = spec.factors();
    const Eigen::VectorXd m = p.factor_mean();
    const Eigen::MatrixXd psi = p.factor_covariance();
    const double log2pi = std::log(2.0 * std::numbers::pi);

    double ll = 0.0;
    Eigen::VectorXd g_mean = Eigen::VectorXd::Zero(q);
    Eigen::MatrixXd g_psi = Eigen::MatrixXd::Zero(q, q);
    double g_theta = 0.0;
    double g_mu_gamma = 0.0;
    double g_mu_eta2_loading = 0.0;

    try {
        for (const auto& ind : data.individuals) {
            const Eigen::Index J = ind.y.size();
            const Eigen::MatrixXd L = growth_loadings<double>(ind.schedule, p.mu_gamma(), p.mu_eta2(), spec);
            const Eigen::MatrixXd LPsi = L * psi;
            Eigen::MatrixXd sigma = LPsi * L.transpose();
            sigma.diagonal().array() += theta;
            Eigen::LLT<Eigen::MatrixXd> llt(sigma);
            if (llt.info() != Eigen::Success)
                return std::nullopt;
            const Eigen::VectorXd r = ind.y - L * m;
            const Eigen::VectorXd a = llt.solve(r);
            const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
            if (!std::isfinite(logdet))
                return std::nullopt;
            ll += -0.5 * (static_cast<double>(J) * log2pi + logdet + r.dot(a));

            // dll = a' dmu + 1/2 tr(W dSigma),  W = a a' - Sigma^{-1}
            Eigen::MatrixXd W = -llt.solve(Eigen::MatrixXd::Identity(J, J));
            W.noalias() += a * a.transpose();

            g_mean.noalias() += L.transpose() * a;
            const Eigen::MatrixXd WL = W * L;
            g_psi.noalias() += 0.5 * L.transpose() * WL;
            g_theta += 0.5 * W.trace();

            const Eigen::MatrixXd GL = a * m.transpose() + WL * psi;
            const LoadingDerivatives dL = growth_loading_derivatives(ind.schedule, p.mu_gamma(), p.mu_eta2(), spec);
            g_mu_gamma += GL.cwiseProduct(dL.d_mu_gamma).sum();
            g_mu_eta2_loading += GL.cwiseProduct(dL.d_mu_eta2).sum();
        }
    } catch (const DivergentCurve&) {
        return std::nullopt;
    }

    LoglikGradient out{ll, Eigen::VectorXd::Zero(spec.free_parameters())};
    out.gradient.head(3) = g_mean.head(3);
    out.gradient(2) += g_mu_eta2_loading;
    out.gradient(3) = g_mu_gamma;
    Eigen::Index k = 4;
    for (int r = 0; r < q; ++r)
        for (int c = r; c < q; ++c)
            out.gradient(k++) = r == c ? g_psi(r, c) : g_psi(r, c) + g_psi(c, r);
    out.gradient(k) = g_theta;
    if (!std::isfinite(out.loglik) || !out.gradient.allFinite())
        return std::nullopt;
    return out;
}

double fiml_loglik(const PopulationParameters& params, const Dataset& data, const ModelSpec& spec)
{
    if (params.reduced != spec.reduced())
        throw DimensionMismatch("parameter dimension does not match model spec (" + describe(spec) + ")");
    const double log2pi = std::log(2.0 * std::numbers::pi);
    std::vector<double> terms;
    terms.reserve(data.size());
    for (const auto& ind : data.individuals) {
        const ImpliedMoments mom = implied_moments(ind.schedule, params, spec);
        Eigen::LLT<Eigen::MatrixXd> llt(mom.covariance);
        if (llt.info() != Eigen::Success)
            throw IndefiniteCovariance("indefinite implied covariance for individual " + ind.id);
        const Eigen::VectorXd r = ind.y - mom.mean;
        const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        terms.push_back(-0.5 * (static_cast<double>(ind.y.size()) * log2pi + logdet + r.dot(llt.solve(r))));
    }
    // Summing in sorted order makes the result independent of row order.
    std::sort(terms.begin(), terms.end());
    double ll = 0.0;
    for (double t : terms)
        ll += t;
    return ll;
}

// ---------------------------------------------------------------------------
// Starts

PopulationParameters default_start(const Dataset& data, const ModelSpec& spec)
{
    constexpr double gamma0 = -0.7;
    const Eigen::Index J = data.waves();
    const std::size_t n = data.size();

    // Per-individual least squares on [1, t, e^{gamma0 t} - 1] for the LCSM and
    // LGC variants alike; both approximate the same curve.
    Eigen::MatrixXd coef(n, 3);
    double rss = 0.0;
    bool ok = J > 3;
    for (std::size_t i = 0; i < n && ok; ++i) {
        const auto& ind = data.individuals[i];
        Eigen::MatrixXd X(J, 3);
        for (Eigen::Index j = 0; j < J; ++j) {
            const double t = ind.schedule[j];
            X(j, 0) = 1.0;
            X(j, 1) = t;
            X(j, 2) = std::exp(std::clamp(gamma0 * t, -kExponentGuard, kExponentGuard)) - 1.0;
        }
        const auto qr = X.colPivHouseholderQr();
        if (qr.rank() < 3) {
            ok = false;
            break;
        }
        const Eigen::Vector3d b = qr.solve(ind.y);
        coef.row(static_cast<Eigen::Index>(i)) = b.transpose();
        rss += (ind.y - X * b).squaredNorm();
    }

    PopulationParameters p;
    p.reduced = spec.reduced();
    p.mean(3) = gamma0;
    if (ok) {
        const Eigen::RowVector3d mean = coef.colwise().mean();
        const double theta = std::max(rss / (static_cast<double>(n) * static_cast<double>(J - 3)), 1e-6);
        p.mean.head(3) = mean.transpose();
        for (int k = 0; k < 3; ++k) {
            const double var = (coef.col(k).array() - mean(k)).square().sum() / std::max<double>(n - 1.0, 1.0);
            p.covariance(k, k) = std::max(0.5 * var, 1e-3 * (1.0 + std::abs(mean(k))));
        }
        p.residual_variance = theta;
    } else {
        // J == 3 or a rank-deficient design: coarse moment heuristics.
        Eigen::VectorXd first(n), slope(n), last(n), tlast(n);
        double ymin = data.individuals.front().y(0), ymax = ymin;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& ind = data.individuals[i];
            first(i) = ind.y(0);
            slope(i) = (ind.y(J - 1) - ind.y(J - 2)) / (ind.schedule[J - 1] - ind.schedule[J - 2]);
            last(i) = ind.y(J - 1);
            tlast(i) = ind.schedule[J - 1];
            ymin = std::min(ymin, ind.y.minCoeff());
            ymax = std::max(ymax, ind.y.maxCoeff());
        }
        const double mu0 = first.mean();
        const double mu1 = slope.mean();
        double mu2 = mu0 - (last.mean() - mu1 * tlast.mean());
        if (!(mu2 < 0.0))
            mu2 = -0.5 * (ymax - ymin);
        p.mean.head(3) << mu0, mu1, mu2;
        const auto var = [n](const Eigen::VectorXd& v) {
            return (v.array() - v.mean()).square().sum() / std::max<double>(n - 1.0, 1.0);
        };
        p.covariance(0, 0) = std::max(0.5 * var(first), 1e-3);
        p.covariance(1, 1) = std::max(0.5 * var(slope), 1e-3);
        p.covariance(2, 2) = std::max(0.5 * std::abs(mu2), 1e-3);
        p.residual_variance = std::max(0.1 * var(first), 1e-3);
    }
    if (!spec.reduced())
        p.covariance(3, 3) = 0.5 * 0.01;
    return p;
}

// ---------------------------------------------------------------------------
// Fit

namespace {

// Optimizer coordinates: natural parameters with the residual variance on a log scale.
Eigen::VectorXd to_internal(Eigen::VectorXd v)
{
    v(v.size() - 1) = std::log(v(v.size() - 1));
    return v;
}

Eigen::VectorXd to_natural(Eigen::VectorXd x)
{
    x(x.size() - 1) = std::exp(x(x.size() - 1));
    return x;
}

constexpr double kDegenerateResidual = 1e-12;

} // namespace

FitResult fit(const Dataset& data, const ModelSpec& spec, const FitConfig& config)
{
    spec.validate();
    data.validate();
    if (data.waves() < 3)
        throw std::invalid_argument("fitting requires at least 3 waves");
    if (static_cast<int>(data.size()) < spec.free_parameters())
        throw std::invalid_argument("fitting requires at least as many individuals as free parameters");
    if (config.max_restarts < 1)
        throw std::invalid_argument("max_restarts must be at least 1");

    FitResult result;
    result.spec = spec;
    result.n = data.size();
    result.n_params = spec.free_parameters();
    result.se = Eigen::VectorXd::Constant(result.n_params, std::numeric_limits<double>::quiet_NaN());

    const double n = static_cast<double>(data.size());
    const Objective objective = [&](const Eigen::VectorXd& x) -> std::optional<ObjectiveEval> {
        if (x(x.size() - 1) < std::log(kDegenerateResidual))
            return std::nullopt;
        const Eigen::VectorXd natural = to_natural(x);
        auto lg = loglik_and_gradient(natural, data, spec);
        if (!lg)
            return std::nullopt;
        ObjectiveEval e{-lg->loglik / n, -lg->gradient / n};
        e.gradient(e.gradient.size() - 1) *= natural(natural.size() - 1);
        return e;
    };

    MinimizerOptions opt;
    opt.gradient_tolerance = config.gradient_tolerance;
    opt.relative_tolerance = config.relative_tolerance;
    opt.max_iterations = config.max_iterations;

    PopulationParameters start = config.start ? *config.start : default_start(data, spec);
    start.reduced = spec.reduced();
    if (spec.reduced()) {
        start.covariance.row(3).setZero();
        start.covariance.col(3).setZero();
    }
    const Eigen::VectorXd base = pack_parameters(start, spec);

    SplitMix64 seeder(config.seed);
    std::optional<MinimizerResult> best;
    for (int attempt = 0; attempt < config.max_restarts; ++attempt) {
        Eigen::VectorXd x0 = base;
        if (attempt > 0) {
            Rng rng(seeder.next());
            for (Eigen::Index k = 0; k < x0.size(); ++k)
                x0(k) *= 1.0 + config.jitter * (2.0 * rng.uniform() - 1.0);
        }
        if (!(x0(x0.size() - 1) > 0.0))
            continue;
        MinimizerResult r = minimize_bfgs(objective, to_internal(x0), opt);
        result.attempts = attempt + 1;
        result.iterations += r.iterations;
        const bool degenerate = r.x.size() > 0 && r.x(r.x.size() - 1) < std::log(1e3 * kDegenerateResidual);
        const bool ok = r.status == MinimizerStatus::converged && !degenerate;
        if (r.status != MinimizerStatus::infeasible_start && (!best || r.value < best->value))
            best = r;
        if (ok) {
            best = std::move(r);
            result.status = FitStatus::converged;
            break;
        }
    }

    if (best) {
        result.estimates = unpack_parameters(to_natural(best->x), spec);
        result.loglik = -best->value * n;
    } else {
        result.estimates = start;
        result.loglik = -std::numeric_limits<double>::infinity();
    }
    const FitIndices idx = fit_indices(result.minus2ll(), result.n_params, result.n);
    result.aic = idx.aic;
    result.bic = idx.bic;
    result.improper = detect_improper(result.estimates);

    if (result.converged() && config.compute_standard_errors) {
        const StandardErrors se = standard_errors(result, data, spec);
        result.se = se.se;
        result.se_available = se.available;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Standard errors and inference

StandardErrors standard_errors_from_gradient(
    const std::function<std::optional<Eigen::VectorXd>(const Eigen::VectorXd&)>& loglik_gradient,
    const Eigen::VectorXd& estimate, const Eigen::VectorXd& steps)
{
    const Eigen::Index p = estimate.size();
    StandardErrors out{Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN()), false};
    const Objective neg = [&](const Eigen::VectorXd& x) -> std::optional<ObjectiveEval> {
        auto g = loglik_gradient(x);
        if (!g)
            return std::nullopt;
        return ObjectiveEval{0.0, -*g};
    };
    const auto H = hessian_from_gradients(neg, estimate, steps);
    if (!H)
        return out;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(*H);
    if (!lu.isInvertible())
        return out;
    const Eigen::MatrixXd cov = lu.inverse();
    bool all = true;
    for (Eigen::Index k = 0; k < p; ++k) {
        if (cov(k, k) > 0.0 && std::isfinite(cov(k, k)))
            out.se(k) = std::sqrt(cov(k, k));
        else
            all = false;
    }
    out.available = all;
    return out;
}

StandardErrors standard_errors(const FitResult& result, const Dataset& data, const ModelSpec& spec)
{
    const Eigen::VectorXd est = pack_parameters(result.estimates, spec);
    Eigen::VectorXd steps = 1e-4 * (1.0 + est.array().abs());
    // Keep the residual-variance probes strictly positive.
    const Eigen::Index last = est.size() - 1;
    steps(last) = std::min(steps(last), 0.1 * est(last));
    return standard_errors_from_gradient(
        [&](const Eigen::VectorXd& x) -> std::optional<Eigen::VectorXd> {
            auto lg = loglik_and_gradient(x, data, spec);
            if (!lg)
                return std::nullopt;
            return lg->gradient;
        },
        est, steps);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double p)
{
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("normal_quantile requires 0 < p < 1");
    // Acklam's rational approximation, then two Newton steps on erfc.
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    for (int it = 0; it < 2; ++it) {
        const double e = normal_cdf(x) - p;
        const double dens = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
        x -= e / dens;
    }
    return x;
}

std::pair<double, double> wald_ci(double estimate, double se, double level)
{
    if (!(se >= 0.0))
        throw std::domain_error("standard error must be non-negative");
    const double z = normal_quantile(0.5 * (1.0 + level));
    return {estimate - z * se, estimate + z * se};
}

double wald_p_value(double estimate, double se)
{
    if (!(se > 0.0))
        return std::numeric_limits<double>::quiet_NaN();
    return std::erfc(std::abs(estimate / se) / std::numbers::sqrt2);
}

FitIndices fit_indices(double minus2ll, int n_params, std::size_t n)
{
    return {minus2ll + 2.0 * n_params, minus2ll + std::log(static_cast<double>(n)) * n_params, minus2ll};
}

ImproperFlags detect_improper(const PopulationParameters& est)
{
    ImproperFlags f;
    const int q = est.reduced ? 3 : 4;
    const Eigen::MatrixXd& psi = est.covariance;
    for (int k = 0; k < q; ++k)
        if (psi(k, k) < 0.0) {
            f.negative_factor_variance = true;
            if (k == 3)
                f.negative_gamma_variance = true;
        }
    for (int r = 0; r < q; ++r)
        for (int c = r + 1; c < q; ++c) {
            if (!(psi(r, r) > 0.0 && psi(c, c) > 0.0))
                continue;
            const double rho = psi(r, c) / std::sqrt(psi(r, r) * psi(c, c));
            if (std::abs(rho) > 1.0) {
                f.out_of_range_correlation = true;
                if (c == 3)
                    f.gamma_correlation_out_of_range = true;
            }
        }
    return f;
}

} // namespace jblcsm
