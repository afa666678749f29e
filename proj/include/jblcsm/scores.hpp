#pragma once

// Mean growth-rate curves and regression-method factor scores for the growth
// factors, latent true scores and latent instantaneous rates.

#include <vector>

#include <Eigen/Dense>

#include "jblcsm/estimation.hpp"
#include "jblcsm/model_core.hpp"

namespace jblcsm {

/// Latent variables of one individual, ordered (growth factors, true scores, rates).
struct LatentVariableSet {
    /// (eta0, eta1, eta2, gamma); for the reduced model gamma is the fixed effect.
    Eigen::Vector4d growth_factors = Eigen::Vector4d::Zero();
    Eigen::VectorXd true_scores; // J
    Eigen::VectorXd rates;       // J - 1
    bool ok = true;
};

/// Matrices of the joint (y, latent) normal model for one individual.
///
/// The latent vector is (eta_g, ly, dy) with eta_g of length q (4 full, 3
/// reduced). Its fourth growth-factor slot is the deviation gamma - mu_gamma, so
/// `latent_mean(3)` reports mu_gamma while the ly and dy blocks use a zero mean
/// for that deviation.
struct ScoreMatrices {
    Eigen::MatrixXd gamma_map;   // Gamma_i
    Eigen::MatrixXd s_core;      // S
    Eigen::MatrixXd lambda_full; // (Lambda_g 0 0)
    Eigen::MatrixXd latent_cov;  // Gamma S Gamma^T
    Eigen::VectorXd latent_mean;
};

/// Lambda_r (mu_eta1, mu_eta2, 0) at the schedule's rate evaluation times.
Eigen::VectorXd mean_rate_curve(const PopulationParameters& params, const Schedule& schedule, const ModelSpec& spec);

/// Lambda_g applied to the growth-factor means.
Eigen::VectorXd mean_true_scores(const PopulationParameters& params, const Schedule& schedule, const ModelSpec& spec);

ScoreMatrices score_matrices(const Schedule& schedule, const PopulationParameters& params, const ModelSpec& spec);

inline Eigen::MatrixXd latent_covariance(const Schedule& schedule, const PopulationParameters& params,
                                         const ModelSpec& spec)
{
    return score_matrices(schedule, params, spec).latent_cov;
}

/// Conditional expectation of the latent variables given y for one individual.
LatentVariableSet score_individual(const Individual& ind, const PopulationParameters& params, const ModelSpec& spec);

std::vector<LatentVariableSet> factor_scores(const Dataset& data, const PopulationParameters& params,
                                             const ModelSpec& spec);

inline std::vector<LatentVariableSet> factor_scores(const Dataset& data, const FitResult& result)
{
    return factor_scores(data, result.estimates, result.spec);
}

/// Mean rate and its pointwise normal band over an arbitrary time grid. The band
/// uses the rate-related block of Psi: var = diag(Lambda_r Psi_r Lambda_r^T).
struct RateBand {
    Eigen::VectorXd times;
    Eigen::VectorXd mean;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
};

RateBand mean_rate_band(const PopulationParameters& params, const Eigen::VectorXd& times, double level = 0.95);

} // namespace jblcsm
