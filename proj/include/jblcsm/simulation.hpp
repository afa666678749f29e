#pragma once

// Monte Carlo harness: factorial design, data generation from the exact
// Jenss-Bayley growth curve, replication driver and performance metrics.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jblcsm/estimation.hpp"
#include "jblcsm/rng.hpp"
#include "jblcsm/types.hpp"

namespace jblcsm {

enum class WaveDesign { seven_equal, ten_equal, ten_unequal };

Eigen::VectorXd wave_times(WaveDesign design);
std::string to_string(WaveDesign design);

struct SimulationCondition {
    int id = 0;
    WaveDesign waves = WaveDesign::ten_equal;
    double delta = 0.25;
    /// When false the first occasion stays at the baseline wave time for every
    /// individual; the initial-status factor is the true score at that time.
    bool jitter_first_wave = false;
    int n = 500;
    double slope_mean = 2.5;
    double slope_sd = 1.0;
    double sd_gamma = 0.10;
    double theta_eps = 1.0;

    double mu_eta0 = 50.0;
    double psi00 = 16.0;
    double mu_eta2 = -30.0;
    double psi22 = 36.0;
    double mu_gamma = -0.7;
    double rho = 0.3;

    /// Stable, filesystem-safe label, e.g. "c13_ten_equal_n500_slope2.5_sdg0.10_te1".
    std::string name() const;
    /// Generating parameters (4-dimensional; gamma row zero when sd_gamma = 0).
    PopulationParameters truth() const;
    /// Generating parameters expressed in the free parameters of `spec`.
    Eigen::VectorXd truth_vector(const ModelSpec& spec) const;
    void validate() const;
};

/// The 3 x 2 x 2 x 3 x 2 factorial design (72 conditions), ids 0..71.
std::vector<SimulationCondition> condition_grid();

std::vector<GrowthFactorsd> generate_factors(const SimulationCondition& cond, Rng& rng);
std::vector<Schedule> generate_schedules(const SimulationCondition& cond, Rng& rng);

struct GeneratedData {
    Dataset data;
    std::vector<GrowthFactorsd> factors;
};

/// y_ij = jb_value(factors_i, t_ij) + eps_ij with eps ~ N(0, theta_eps).
GeneratedData generate_dataset(const SimulationCondition& cond, Rng& rng);

/// Dataset of attempt `attempt` of `cond` under `master_seed`, as used by run_replication.
GeneratedData replication_dataset(const SimulationCondition& cond, std::uint64_t master_seed, std::size_t attempt);

/// Proposed-full, proposed-reduced, existing-full, existing-reduced.
std::vector<ModelSpec> simulation_models();
std::string model_label(const ModelSpec& spec);

struct ReplicationRecord {
    std::size_t attempt = 0;
    std::uint64_t seed = 0;
    std::vector<FitResult> fits;         // one per model, in run order
    std::vector<ImproperFlags> improper; // flags of the fit before any substitution
    std::vector<bool> substituted;       // full estimates replaced by the reduced fit
};

struct ParameterMetrics {
    std::string name;
    double truth = 0.0;
    bool relative = true; // false when truth == 0: bias and RMSE are absolute
    double bias = 0.0;
    double empirical_se = 0.0;
    double rmse = 0.0;
    double coverage = 0.0;
    double mc_se_bias = 0.0;
    std::size_t replications = 0;
};

struct MetricSummary {
    ModelSpec spec;
    std::vector<ParameterMetrics> parameters;
    std::size_t convergent = 0;
    std::size_t attempts = 0;
};

/// Performance metrics of one parameter over S replications.
ParameterMetrics parameter_metrics(std::span<const double> estimates, std::span<const double> lower,
                                   std::span<const double> upper, double truth);

/// Metrics of every free parameter of `model` across the given records; CIs are
/// 95% Wald intervals from each record's SEs (missing SE counts as not covered).
MetricSummary metrics(std::span<const ReplicationRecord> records, std::size_t model, const ModelSpec& spec,
                      const Eigen::VectorXd& truth);

struct ImproperTally {
    std::size_t negative_gamma_variance = 0;
    std::size_t gamma_correlation_out_of_range = 0;
    std::string format() const;
    static ImproperTally parse(const std::string& text);
};

struct RunOptions {
    std::uint64_t master_seed = 0;
    unsigned threads = 1;
    FitConfig fit;
    /// Stop after this many consecutive attempts in which every model failed, as
    /// a multiple of S.
    int pathology_factor = 20;
};

struct ConditionResult {
    SimulationCondition condition;
    std::vector<ModelSpec> models;
    /// Attempts in order; only the first S convergent records per model enter the metrics.
    std::vector<ReplicationRecord> records;
    std::vector<MetricSummary> summaries;
    std::vector<ImproperTally> tallies; // per model (non-zero only for full models)
    std::vector<std::vector<std::size_t>> retained; // per model, indices into records
    bool aborted = false;
    std::size_t attempts = 0;
};

/// Fits every model to one generated dataset, with fallback substitution of
/// improper full fits by their reduced counterparts when both are in `models`.
ReplicationRecord run_replication(const SimulationCondition& cond, std::span<const ModelSpec> models,
                                  std::size_t attempt, const RunOptions& options);

ConditionResult run_condition(const SimulationCondition& cond, std::size_t S, std::span<const ModelSpec> models,
                              const RunOptions& options);

/// Threads from JBLCSM_THREADS, else hardware concurrency (at least 1).
unsigned default_threads();

} // namespace jblcsm
