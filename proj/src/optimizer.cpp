#include "jblcsm/optimizer.hpp"

#include <cmath>
#include <limits>

namespace jblcsm {

std::optional<Eigen::MatrixXd> hessian_from_gradients(const Objective& f, const Eigen::VectorXd& x,
                                                      const Eigen::VectorXd& steps)
{
    const Eigen::Index p = x.size();
    Eigen::MatrixXd H(p, p);
    Eigen::VectorXd probe = x;
    for (Eigen::Index k = 0; k < p; ++k) {
        probe(k) = x(k) + steps(k);
        const auto up = f(probe);
        probe(k) = x(k) - steps(k);
        const auto down = f(probe);
        probe(k) = x(k);
        if (!up || !down)
            return std::nullopt;
        H.col(k) = (up->gradient - down->gradient) / (2.0 * steps(k));
    }
    if (!H.allFinite())
        return std::nullopt;
    return Eigen::MatrixXd(0.5 * (H + H.transpose()));
}

namespace {

Eigen::MatrixXd seed_inverse_hessian(const Objective& f, const Eigen::VectorXd& x, const MinimizerOptions& opt)
{
    const Eigen::Index p = x.size();
    const Eigen::VectorXd steps = opt.hessian_step * (1.0 + x.array().abs());
    if (const auto H = hessian_from_gradients(f, x, steps)) {
        Eigen::LLT<Eigen::MatrixXd> llt(*H);
        if (llt.info() == Eigen::Success) {
            Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(p, p));
            if (inv.allFinite())
                return inv;
        }
        // Indefinite: fall back to the absolute diagonal curvature.
        Eigen::MatrixXd D = Eigen::MatrixXd::Zero(p, p);
        for (Eigen::Index k = 0; k < p; ++k) {
            const double c = std::abs((*H)(k, k));
            D(k, k) = c > 1e-12 ? 1.0 / c : 1.0;
        }
        return D;
    }
    return Eigen::MatrixXd::Identity(p, p);
}

} // namespace

MinimizerResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const MinimizerOptions& opt)
{
    MinimizerResult out;
    out.x = std::move(x0);
    auto cur = f(out.x);
    if (!cur || !std::isfinite(cur->value) || !cur->gradient.allFinite()) {
        out.status = MinimizerStatus::infeasible_start;
        return out;
    }

    Eigen::MatrixXd Hinv = seed_inverse_hessian(f, out.x, opt);
    bool reseeded = false;
    int stalled = 0;
    constexpr double armijo = 1e-4;

    out.status = MinimizerStatus::iteration_limit;
    for (out.iterations = 0; out.iterations < opt.max_iterations; ++out.iterations) {
        if (cur->gradient.norm() < opt.gradient_tolerance) {
            out.status = MinimizerStatus::converged;
            break;
        }

        Eigen::VectorXd dir = -Hinv * cur->gradient;
        double slope = cur->gradient.dot(dir);
        if (!(slope < 0.0)) {
            dir = -cur->gradient;
            slope = -cur->gradient.squaredNorm();
            Hinv.setIdentity();
        }

        double step = 1.0;
        std::optional<ObjectiveEval> next;
        Eigen::VectorXd xn;
        for (int tries = 0; tries < 60; ++tries, step *= 0.5) {
            xn = out.x + step * dir;
            next = f(xn);
            if (next && std::isfinite(next->value) && next->gradient.allFinite() &&
                next->value <= cur->value + armijo * step * slope)
                break;
            next.reset();
        }

        if (!next) {
            if (reseeded) {
                out.status = MinimizerStatus::line_search_failed;
                break;
            }
            Hinv = seed_inverse_hessian(f, out.x, opt);
            reseeded = true;
            continue;
        }

        const Eigen::VectorXd s = xn - out.x;
        const Eigen::VectorXd y = next->gradient - cur->gradient;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::VectorXd Hy = Hinv * y;
            const double yHy = y.dot(Hy);
            Hinv += ((sy + yHy) * rho * rho) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
        }

        const double rel = std::abs(cur->value - next->value) / std::max(1.0, std::abs(next->value));
        stalled = rel < opt.relative_tolerance ? stalled + 1 : 0;
        out.x = xn;
        cur = std::move(next);
        if (stalled >= opt.stall_iterations) {
            out.status = MinimizerStatus::converged;
            ++out.iterations;
            break;
        }
    }

    out.value = cur->value;
    out.gradient = cur->gradient;
    return out;
}

} // namespace jblcsm
