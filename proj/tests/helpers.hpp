#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "jblcsm/estimation.hpp"
#include "jblcsm/rng.hpp"
#include "jblcsm/types.hpp"

namespace jbtest {

using namespace jblcsm;

/// Fixed generating values of the simulation design with sd(gamma) = sdg.
inline PopulationParameters design_parameters(double sdg = 0.1, double slope_mean = 2.5, double slope_sd = 1.0)
{
    PopulationParameters p;
    p.mean << 50.0, slope_mean, -30.0, -0.7;
    const Eigen::Vector4d sd(4.0, slope_sd, 6.0, sdg);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            p.covariance(r, c) = (r == c ? 1.0 : 0.3) * sd(r) * sd(c);
    p.residual_variance = 1.0;
    return p;
}

inline PopulationParameters reduce(PopulationParameters p)
{
    p.reduced = true;
    p.covariance.row(3).setZero();
    p.covariance.col(3).setZero();
    return p;
}

inline Schedule unit_schedule(int J, double start = 0.0)
{
    return Schedule(Eigen::VectorXd::LinSpaced(J, start, start + J - 1));
}

/// Strictly increasing random times with gaps in [0.5, 1.5].
inline Schedule random_schedule(int J, Rng& rng)
{
    Eigen::VectorXd t(J);
    t(0) = rng.uniform(-0.25, 0.25);
    for (int j = 1; j < J; ++j)
        t(j) = t(j - 1) + rng.uniform(0.5, 1.5);
    return Schedule(t);
}

/// Multivariate-normal log-density by explicit lower-triangular solve.
inline double mvn_logpdf(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, const Eigen::MatrixXd& S)
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
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index m = 0; m < i; ++m)
            z(i) -= L(i, m) * z(m);
        z(i) /= L(i, i);
    }
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < k; ++i)
        logdet += std::log(L(i, i));
    return -0.5 * static_cast<double>(k) * std::log(2.0 * std::numbers::pi) - logdet - 0.5 * z.squaredNorm();
}

} // namespace jbtest
