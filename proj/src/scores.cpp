#include "jblcsm/scores.hpp"

#include <cmath>

namespace jblcsm {

namespace {

Eigen::VectorXd rate_factor_mean(const PopulationParameters& p)
{
    const Eigen::VectorXd m = p.factor_mean();
    return m.tail(m.size() - 1);
}

} // namespace

Eigen::VectorXd mean_rate_curve(const PopulationParameters& params, const Schedule& schedule, const ModelSpec& spec)
{
    const Eigen::MatrixXd Lr = rate_loadings<double>(schedule, params.mu_gamma(), params.mu_eta2(), spec);
    return Lr * rate_factor_mean(params);
}

Eigen::VectorXd mean_true_scores(const PopulationParameters& params, const Schedule& schedule, const ModelSpec& spec)
{
    return growth_loadings(schedule, params, spec) * params.factor_mean();
}

ScoreMatrices score_matrices(const Schedule& schedule, const PopulationParameters& params, const ModelSpec& spec)
{
    if (params.reduced != spec.reduced())
        throw DimensionMismatch("parameter dimension does not match model spec (" + describe(spec) + ")");
    const auto b = loading_bundle<double>(schedule, params.mu_gamma(), params.mu_eta2(), spec);
    const Eigen::Index J = schedule.waves();
    const Eigen::Index K = J - 1;
    const Eigen::Index q = spec.factors();
    const Eigen::Index dim = q + J + K;

    ScoreMatrices m;
    m.gamma_map = Eigen::MatrixXd::Zero(dim, dim);
    m.gamma_map.topLeftCorner(q, q).setIdentity();
    m.gamma_map.block(q, 0, J, q) = b.growth_loadings;
    m.gamma_map.block(q, q, J, J) = Eigen::MatrixXd::Ones(J, J).triangularView<Eigen::Lower>();
    m.gamma_map.block(q, q + J, J, K) = b.interval_matrix;
    m.gamma_map.block(q + J, 1, K, q - 1) = b.rate_loadings;
    m.gamma_map.bottomRightCorner(K, K).setIdentity();

    m.s_core = Eigen::MatrixXd::Zero(dim, dim);
    m.s_core.topLeftCorner(q, q) = params.factor_covariance();

    m.lambda_full = Eigen::MatrixXd::Zero(J, dim);
    m.lambda_full.leftCols(q) = b.growth_loadings;

    m.latent_cov = m.gamma_map * m.s_core * m.gamma_map.transpose();

    const Eigen::VectorXd fm = params.factor_mean();
    m.latent_mean.resize(dim);
    m.latent_mean.head(q) = params.mean.head(q);
    m.latent_mean.segment(q, J) = b.growth_loadings * fm;
    m.latent_mean.tail(K) = b.rate_loadings * fm.tail(q - 1);
    return m;
}

LatentVariableSet score_individual(const Individual& ind, const PopulationParameters& params, const ModelSpec& spec)
{
    const ScoreMatrices m = score_matrices(ind.schedule, params, spec);
    const Eigen::Index J = ind.schedule.waves();
    const Eigen::Index q = spec.factors();

    Eigen::MatrixXd cond = m.lambda_full * m.latent_cov * m.lambda_full.transpose();
    cond.diagonal().array() += params.residual_variance;
    const Eigen::VectorXd mu_y = m.lambda_full.leftCols(q) * params.factor_mean();

    LatentVariableSet out;
    Eigen::VectorXd eta = m.latent_mean;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(cond);
    const bool solvable = ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                          ldlt.vectorD().minCoeff() > 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff());
    if (solvable) {
        const Eigen::VectorXd w = ldlt.solve(ind.y - mu_y);
        eta += m.latent_cov * m.lambda_full.transpose() * w;
    } else {
        out.ok = false;
    }

    out.growth_factors.head(q) = eta.head(q);
    if (q == 3)
        out.growth_factors(3) = params.mean(3);
    out.true_scores = eta.segment(q, J);
    out.rates = eta.tail(J - 1);
    return out;
}

std::vector<LatentVariableSet> factor_scores(const Dataset& data, const PopulationParameters& params,
                                             const ModelSpec& spec)
{
    std::vector<LatentVariableSet> out;
    out.reserve(data.size());
    for (const auto& ind : data.individuals)
        out.push_back(score_individual(ind, params, spec));
    return out;
}

RateBand mean_rate_band(const PopulationParameters& params, const Eigen::VectorXd& times, double level)
{
    const Eigen::MatrixXd Lr = rate_loadings_at<double>(times, params.mu_gamma(), params.mu_eta2(), params.reduced);
    const Eigen::Index r = Lr.cols();
    const Eigen::MatrixXd psi_r = params.factor_covariance().bottomRightCorner(r, r);
    RateBand band;
    band.times = times;
    band.mean = Lr * rate_factor_mean(params);
    const Eigen::VectorXd var = (Lr * psi_r).cwiseProduct(Lr).rowwise().sum();
    const double z = normal_quantile(0.5 * (1.0 + level));
    const Eigen::VectorXd half = z * var.cwiseMax(0.0).cwiseSqrt();
    band.lower = band.mean - half;
    band.upper = band.mean + half;
    return band;
}

} // namespace jblcsm
