#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace jblcsm {

/// Thrown when |gamma * t| exceeds the exponent guard and the curve would overflow.
class DivergentCurve : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Thrown when a model-implied covariance matrix is not positive definite.
class IndefiniteCovariance : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr double kExponentGuard = 700.0;

/// One individual's Jenss-Bayley coefficients.
///
/// eta0 is the initial status, eta1 the slope of the linear asymptote, eta2 the
/// vertical distance between the initial status and the asymptote intercept, and
/// gamma the log ratio of growth acceleration (negative for a curve that levels
/// onto its asymptote).
template <typename Scalar>
struct GrowthFactors {
    Scalar eta0{};
    Scalar eta1{};
    Scalar eta2{};
    Scalar gamma{};

    bool finite() const
    {
        using std::isfinite;
        return isfinite(eta0) && isfinite(eta1) && isfinite(eta2) && isfinite(gamma);
    }

    /// False when gamma >= 0; such a curve never approaches a linear asymptote.
    bool approaches_asymptote() const { return gamma < Scalar(0); }
};

using GrowthFactorsd = GrowthFactors<double>;

enum class Expression { midpoint, right_endpoint };
enum class Acceleration { random, fixed };
enum class Framework { lcsm, lgc };

/// Selects one member of the model family.
///
/// `acceleration = fixed` is the reduced model: gamma is a fixed effect and the
/// fourth growth factor is dropped.
struct ModelSpec {
    Expression expression = Expression::midpoint;
    Acceleration acceleration = Acceleration::random;
    Framework framework = Framework::lcsm;

    void validate() const
    {
        if (expression == Expression::right_endpoint && framework != Framework::lcsm)
            throw std::invalid_argument("right_endpoint expression is only defined for the lcsm framework");
    }

    bool reduced() const { return acceleration == Acceleration::fixed; }
    /// Number of growth factors carrying random effects (4 full, 3 reduced).
    int factors() const { return reduced() ? 3 : 4; }
    /// Number of free parameters: means + lower triangle of Psi + residual variance.
    int free_parameters() const
    {
        const int q = factors();
        return 4 + q * (q + 1) / 2 + 1;
    }

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

std::string to_string(Expression e);
std::string to_string(Acceleration a);
std::string to_string(Framework f);
std::string describe(const ModelSpec& spec);

/// An individual's ordered measurement times.
class Schedule {
public:
    Schedule() = default;
    explicit Schedule(Eigen::VectorXd times) : times_(std::move(times))
    {
        if (times_.size() < 1)
            throw std::invalid_argument("schedule needs at least one measurement time");
        for (Eigen::Index j = 0; j < times_.size(); ++j) {
            if (!std::isfinite(times_(j)))
                throw std::invalid_argument("schedule contains a non-finite time");
            if (j > 0 && !(times_(j) > times_(j - 1)))
                throw std::invalid_argument("schedule times must be strictly increasing");
        }
    }

    const Eigen::VectorXd& times() const { return times_; }
    Eigen::Index waves() const { return times_.size(); }
    double operator[](Eigen::Index j) const { return times_(j); }

private:
    Eigen::VectorXd times_;
};

/// Growth-factor mean vector, covariance and residual variance.
///
/// Storage is always 4-dimensional. For the reduced model `mean(3)` holds the
/// fixed gamma and row/column 3 of `covariance` is identically zero. The
/// covariance may carry negative variances; those estimates are flagged by the
/// estimation layer rather than rejected here.
struct PopulationParameters {
    Eigen::Vector4d mean = Eigen::Vector4d::Zero();
    Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();
    double residual_variance = 1.0;
    bool reduced = false;

    double mu_gamma() const { return mean(3); }
    double mu_eta2() const { return mean(2); }

    /// Mean of the random-effect vector the loadings act on: the fourth slot is
    /// the deviation gamma - mu_gamma, whose mean is zero.
    Eigen::VectorXd factor_mean() const
    {
        Eigen::VectorXd m = mean.head(reduced ? 3 : 4);
        if (!reduced)
            m(3) = 0.0;
        return m;
    }

    Eigen::MatrixXd factor_covariance() const
    {
        const int q = reduced ? 3 : 4;
        return covariance.topLeftCorner(q, q);
    }

    void validate() const
    {
        if (!(residual_variance > 0.0) || !std::isfinite(residual_variance))
            throw std::invalid_argument("residual variance must be positive");
        if (!mean.allFinite() || !covariance.allFinite())
            throw std::invalid_argument("population parameters must be finite");
        if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + covariance.cwiseAbs().maxCoeff()))
            throw std::invalid_argument("growth-factor covariance must be symmetric");
        if (reduced && (covariance.row(3).cwiseAbs().maxCoeff() != 0.0))
            throw std::invalid_argument("reduced parameters must have a zero gamma row/column");
    }
};

} // namespace jblcsm
