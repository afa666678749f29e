#pragma once

#include <functional>
#include <optional>

#include <Eigen/Dense>

namespace jblcsm {

/// Objective value and gradient at a point; nullopt marks an infeasible point
/// (the line search backs off from it).
struct ObjectiveEval {
    double value;
    Eigen::VectorXd gradient;
};

using Objective = std::function<std::optional<ObjectiveEval>(const Eigen::VectorXd&)>;

struct MinimizerOptions {
    double gradient_tolerance = 1e-6;
    double relative_tolerance = 1e-10;
    int stall_iterations = 5;
    int max_iterations = 2000;
    /// Step used for the finite-difference Hessian that seeds the inverse-Hessian
    /// approximation; relative to 1 + |x_k|.
    double hessian_step = 1e-5;
};

enum class MinimizerStatus { converged, iteration_limit, line_search_failed, infeasible_start };

struct MinimizerResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd gradient;
    int iterations = 0;
    MinimizerStatus status = MinimizerStatus::infeasible_start;
};

/// Central-difference Hessian assembled from gradient evaluations. Returns
/// nullopt if any probe lands on an infeasible point.
std::optional<Eigen::MatrixXd> hessian_from_gradients(const Objective& f, const Eigen::VectorXd& x,
                                                      const Eigen::VectorXd& steps);

/// Quasi-Newton (BFGS) minimization with Armijo backtracking.
///
/// The inverse-Hessian approximation starts from a finite-difference Hessian
/// when that is positive definite, and is re-seeded once if the line search
/// stalls before convergence.
MinimizerResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const MinimizerOptions& options = {});

} // namespace jblcsm
