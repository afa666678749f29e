#pragma once

// Jenss-Bayley curve, individual loading matrices and model-implied moments.
//
// Everything here is a pure function of its arguments. The loading builders are
// templated on the scalar so the Taylor-expansion checks can run in extended
// precision.

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "jblcsm/types.hpp"

namespace jblcsm {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

namespace detail {

template <typename Scalar>
Scalar guarded_exp(Scalar gamma, Scalar t)
{
    using std::abs;
    using std::exp;
    const Scalar arg = gamma * t;
    if (!(abs(arg) <= Scalar(kExponentGuard)))
        throw DivergentCurve("divergent curve: |gamma * t| exceeds " + std::to_string(kExponentGuard));
    return exp(arg);
}

} // namespace detail

/// eta0 + eta1 t + eta2 (exp(gamma t) - 1)
template <typename Scalar>
Scalar jb_value(const GrowthFactors<Scalar>& f, Scalar t)
{
    return f.eta0 + f.eta1 * t + f.eta2 * (detail::guarded_exp(f.gamma, t) - Scalar(1));
}

/// Instantaneous rate, d/dt of jb_value: eta1 + eta2 gamma exp(gamma t).
template <typename Scalar>
Scalar jb_rate(const GrowthFactors<Scalar>& f, Scalar t)
{
    return f.eta1 + f.eta2 * f.gamma * detail::guarded_exp(f.gamma, t);
}

inline Eigen::VectorXd midpoints(const Schedule& s)
{
    const auto& t = s.times();
    const Eigen::Index k = t.size() - 1;
    if (k <= 0)
        return Eigen::VectorXd(0);
    return 0.5 * (t.head(k) + t.tail(k));
}

/// Times at which the instantaneous rate stands in for each interval's change.
inline Eigen::VectorXd rate_evaluation_times(const Schedule& s, Expression e)
{
    if (e == Expression::midpoint)
        return midpoints(s);
    const Eigen::Index k = s.waves() - 1;
    return k > 0 ? Eigen::VectorXd(s.times().tail(k)) : Eigen::VectorXd(0);
}

/// First-order loading row for the rate at t* around gamma = mu_gamma:
/// [1, mu_g e^{mu_g t}, mu_eta2 e^{mu_g t} (1 + mu_g t)]. The third column is
/// dropped when `reduced`.
template <typename Scalar>
MatrixX<Scalar> rate_loadings_at(const Eigen::Ref<const Eigen::VectorXd>& eval_times,
                                 Scalar mu_gamma, Scalar mu_eta2, bool reduced)
{
    const Eigen::Index rows = eval_times.size();
    MatrixX<Scalar> L(rows, reduced ? 2 : 3);
    for (Eigen::Index j = 0; j < rows; ++j) {
        const Scalar t = Scalar(eval_times(j));
        const Scalar e = detail::guarded_exp(mu_gamma, t);
        L(j, 0) = Scalar(1);
        L(j, 1) = mu_gamma * e;
        if (!reduced)
            L(j, 2) = mu_eta2 * e * (Scalar(1) + mu_gamma * t);
    }
    return L;
}

template <typename Scalar>
MatrixX<Scalar> rate_loadings(const Schedule& s, Scalar mu_gamma, Scalar mu_eta2, const ModelSpec& spec)
{
    spec.validate();
    return rate_loadings_at<Scalar>(rate_evaluation_times(s, spec.expression), mu_gamma, mu_eta2, spec.reduced());
}

/// J x (J-1) staircase of interval lengths; row j accumulates the first j intervals.
inline Eigen::MatrixXd interval_matrix(const Schedule& s)
{
    const Eigen::Index J = s.waves();
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(J, std::max<Eigen::Index>(J - 1, 0));
    for (Eigen::Index k = 0; k + 1 < J; ++k) {
        const double h = s[k + 1] - s[k];
        omega.block(k + 1, k, J - k - 1, 1).setConstant(h);
    }
    return omega;
}

template <typename Scalar>
struct LoadingBundle {
    MatrixX<Scalar> rate_loadings;   // (J-1) x 3, or x 2 when reduced
    Eigen::MatrixXd interval_matrix; // J x (J-1)
    MatrixX<Scalar> growth_loadings; // J x 4, or x 3 when reduced
};

/// Loadings of the latent-growth-curve variant: row j is
/// [1, t, e^{mu_g t} - 1, mu_eta2 t e^{mu_g t}], last column dropped when reduced.
template <typename Scalar>
MatrixX<Scalar> lgc_growth_loadings(const Schedule& s, Scalar mu_gamma, Scalar mu_eta2, bool reduced)
{
    const Eigen::Index J = s.waves();
    MatrixX<Scalar> L(J, reduced ? 3 : 4);
    for (Eigen::Index j = 0; j < J; ++j) {
        const Scalar t = Scalar(s[j]);
        const Scalar e = detail::guarded_exp(mu_gamma, t);
        L(j, 0) = Scalar(1);
        L(j, 1) = t;
        L(j, 2) = e - Scalar(1);
        if (!reduced)
            L(j, 3) = mu_eta2 * t * e;
    }
    return L;
}

template <typename Scalar>
LoadingBundle<Scalar> loading_bundle(const Schedule& s, Scalar mu_gamma, Scalar mu_eta2, const ModelSpec& spec)
{
    spec.validate();
    LoadingBundle<Scalar> b;
    b.interval_matrix = interval_matrix(s);
    b.rate_loadings = rate_loadings<Scalar>(s, mu_gamma, mu_eta2, spec);
    if (spec.framework == Framework::lgc) {
        b.growth_loadings = lgc_growth_loadings<Scalar>(s, mu_gamma, mu_eta2, spec.reduced());
        return b;
    }
    const Eigen::Index J = s.waves();
    b.growth_loadings.resize(J, spec.factors());
    b.growth_loadings.col(0).setOnes();
    if (J > 1)
        b.growth_loadings.rightCols(spec.factors() - 1) = b.interval_matrix.template cast<Scalar>() * b.rate_loadings;
    else
        b.growth_loadings.rightCols(spec.factors() - 1).setZero();
    return b;
}

template <typename Scalar>
MatrixX<Scalar> growth_loadings(const Schedule& s, Scalar mu_gamma, Scalar mu_eta2, const ModelSpec& spec)
{
    return loading_bundle<Scalar>(s, mu_gamma, mu_eta2, spec).growth_loadings;
}

inline Eigen::MatrixXd growth_loadings(const Schedule& s, const PopulationParameters& p, const ModelSpec& spec)
{
    return growth_loadings<double>(s, p.mu_gamma(), p.mu_eta2(), spec);
}

/// Partial derivatives of the growth loadings with respect to mu_gamma and mu_eta2.
struct LoadingDerivatives {
    Eigen::MatrixXd d_mu_gamma;
    Eigen::MatrixXd d_mu_eta2;
};

inline LoadingDerivatives growth_loading_derivatives(const Schedule& s, double mu_gamma, double mu_eta2,
                                                     const ModelSpec& spec)
{
    const Eigen::Index J = s.waves();
    const int q = spec.factors();
    LoadingDerivatives d{Eigen::MatrixXd::Zero(J, q), Eigen::MatrixXd::Zero(J, q)};
    if (spec.framework == Framework::lgc) {
        for (Eigen::Index j = 0; j < J; ++j) {
            const double t = s[j];
            const double e = detail::guarded_exp(mu_gamma, t);
            d.d_mu_gamma(j, 2) = t * e;
            if (q == 4) {
                d.d_mu_gamma(j, 3) = mu_eta2 * t * t * e;
                d.d_mu_eta2(j, 3) = t * e;
            }
        }
        return d;
    }
    if (J < 2)
        return d;
    const Eigen::VectorXd te = rate_evaluation_times(s, spec.expression);
    Eigen::MatrixXd dr_g = Eigen::MatrixXd::Zero(J - 1, q - 1);
    Eigen::MatrixXd dr_m = Eigen::MatrixXd::Zero(J - 1, q - 1);
    for (Eigen::Index j = 0; j < J - 1; ++j) {
        const double t = te(j);
        const double e = detail::guarded_exp(mu_gamma, t);
        dr_g(j, 1) = e * (1.0 + mu_gamma * t);
        if (q == 4) {
            dr_g(j, 2) = mu_eta2 * t * e * (2.0 + mu_gamma * t);
            dr_m(j, 2) = e * (1.0 + mu_gamma * t);
        }
    }
    const Eigen::MatrixXd omega = interval_matrix(s);
    d.d_mu_gamma.rightCols(q - 1) = omega * dr_g;
    d.d_mu_eta2.rightCols(q - 1) = omega * dr_m;
    return d;
}

struct ImpliedMoments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
};

/// mu_i = Lambda_g m, Sigma_i = Lambda_g Psi Lambda_g^T + theta I, with loadings
/// rebuilt from the current mu_gamma and mu_eta2.
inline ImpliedMoments implied_moments(const Schedule& s, const PopulationParameters& p, const ModelSpec& spec)
{
    if (p.reduced != spec.reduced())
        throw DimensionMismatch("parameter dimension does not match model spec (" + describe(spec) + ")");
    const Eigen::MatrixXd L = growth_loadings(s, p, spec);
    ImpliedMoments m;
    m.mean = L * p.factor_mean();
    m.covariance = L * p.factor_covariance() * L.transpose();
    m.covariance.diagonal().array() += p.residual_variance;
    return m;
}

} // namespace jblcsm
