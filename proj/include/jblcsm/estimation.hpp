#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "jblcsm/model_core.hpp"
#include "jblcsm/types.hpp"

namespace jblcsm {

struct Individual {
    std::string id;
    Eigen::VectorXd y;
    Schedule schedule;
};

/// Complete-case wide data: every individual has the same number of waves,
/// times may differ per individual.
struct Dataset {
    std::vector<Individual> individuals;

    std::size_t size() const { return individuals.size(); }
    Eigen::Index waves() const { return individuals.empty() ? 0 : individuals.front().y.size(); }
    /// Throws std::invalid_argument on ragged or non-finite data.
    void validate() const;
};

struct FitConfig {
    int max_restarts = 10;
    double gradient_tolerance = 1e-6;
    double relative_tolerance = 1e-10;
    double jitter = 0.2; // starts are scaled by U(1 - jitter, 1 + jitter)
    int max_iterations = 2000;
    std::uint64_t seed = 0;
    bool compute_standard_errors = true;
    /// Explicit start; default heuristics are used when empty.
    std::optional<PopulationParameters> start;
};

enum class FitStatus { converged, failed_after_restarts };

struct ImproperFlags {
    bool negative_factor_variance = false;
    bool out_of_range_correlation = false;
    /// Specifically a negative variance of gamma, or |corr| > 1 involving gamma.
    bool negative_gamma_variance = false;
    bool gamma_correlation_out_of_range = false;

    bool any() const { return negative_factor_variance || out_of_range_correlation; }
};

struct FitResult {
    ModelSpec spec;
    PopulationParameters estimates;
    /// One entry per free parameter in `parameter_names(spec)` order; NaN when unavailable.
    Eigen::VectorXd se;
    bool se_available = false;
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    int n_params = 0;
    std::size_t n = 0;
    FitStatus status = FitStatus::failed_after_restarts;
    ImproperFlags improper;
    int iterations = 0;
    int attempts = 0;

    bool converged() const { return status == FitStatus::converged; }
    double minus2ll() const { return -2.0 * loglik; }
};

/// Free-parameter labels in reporting order (15 full, 11 reduced).
std::vector<std::string> parameter_names(const ModelSpec& spec);

/// Natural-scale free-parameter vector; order matches parameter_names.
Eigen::VectorXd pack_parameters(const PopulationParameters& p, const ModelSpec& spec);
PopulationParameters unpack_parameters(const Eigen::Ref<const Eigen::VectorXd>& v, const ModelSpec& spec);

struct LoglikGradient {
    double loglik;
    Eigen::VectorXd gradient; // with respect to the natural-scale free parameters
};

/// Log-likelihood and analytic gradient; nullopt when any implied covariance is
/// not positive definite or a loading diverges.
std::optional<LoglikGradient> loglik_and_gradient(const Eigen::Ref<const Eigen::VectorXd>& params,
                                                  const Dataset& data, const ModelSpec& spec);

/// Sum over individuals of multivariate-normal log-densities with person-specific
/// implied moments, constant -(J/2) ln(2 pi) included.
/// Throws IndefiniteCovariance when some Sigma_i is not positive definite.
double fiml_loglik(const PopulationParameters& params, const Dataset& data, const ModelSpec& spec);

/// Heuristic starting values from per-individual least squares on the curve
/// shape with gamma fixed at -0.7.
PopulationParameters default_start(const Dataset& data, const ModelSpec& spec);

FitResult fit(const Dataset& data, const ModelSpec& spec, const FitConfig& config = {});

struct StandardErrors {
    Eigen::VectorXd se;
    bool available = false;
};

/// Square roots of the diagonal of the inverse observed information, from a
/// central-difference Hessian of the analytic gradient.
StandardErrors standard_errors(const FitResult& result, const Dataset& data, const ModelSpec& spec);

/// Same computation on an arbitrary log-likelihood gradient; exposed for testing.
StandardErrors standard_errors_from_gradient(
    const std::function<std::optional<Eigen::VectorXd>(const Eigen::VectorXd&)>& loglik_gradient,
    const Eigen::VectorXd& estimate, const Eigen::VectorXd& steps);

double normal_quantile(double p);
double normal_cdf(double z);

/// estimate +- z_{(1+level)/2} se
std::pair<double, double> wald_ci(double estimate, double se, double level = 0.95);
/// Two-sided Wald p-value for H0: parameter = 0.
double wald_p_value(double estimate, double se);

struct FitIndices {
    double aic;
    double bic;
    double minus2ll;
};

FitIndices fit_indices(double minus2ll, int n_params, std::size_t n);
inline FitIndices fit_indices(const FitResult& r) { return fit_indices(r.minus2ll(), r.n_params, r.n); }

ImproperFlags detect_improper(const PopulationParameters& estimates);
inline ImproperFlags detect_improper(const FitResult& r) { return detect_improper(r.estimates); }

} // namespace jblcsm
