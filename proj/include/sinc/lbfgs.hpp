#pragma once

#include "sinc/types.hpp"

#include <cmath>
#include <deque>

namespace sinc {

struct LbfgsReport {
    double value = 0.0;
    int evaluations = 0;
    int iterations = 0;
    bool converged = false;
    bool line_search_failed = false;
};

/// Limited-memory BFGS with Armijo backtracking.
///
/// `fg(x, g)` returns f(x) and writes the gradient into g. The iterate only
/// moves to points with strictly lower f, so on return f(x) <= f(x_initial).
/// A non-finite trial value is treated as an overshoot and backtracked.
template <class ValueAndGradient>
LbfgsReport minimize_lbfgs(ValueAndGradient&& fg, Vector& x, const LbfgsSettings& settings)
{
    constexpr double armijo_c1 = 1e-4;
    constexpr int max_backtracks = 40;

    LbfgsReport report;
    const Index dim = x.size();
    Vector g(dim);
    double f = fg(x, g);
    report.evaluations = 1;
    report.value = f;
    if (!std::isfinite(f) || !g.allFinite()) {
        throw Error(ErrorKind::NonFiniteResult, "objective is not finite at the starting point");
    }
    if (dim == 0 || g.lpNorm<Eigen::Infinity>() < settings.gradient_tol) {
        report.converged = true;
        return report;
    }

    std::deque<Vector> s_hist;
    std::deque<Vector> y_hist;
    std::deque<double> rho_hist;
    std::vector<double> alpha(static_cast<std::size_t>(settings.memory));

    Vector direction(dim);
    Vector x_trial(dim);
    Vector g_trial(dim);
    bool retried_steepest = false;

    while (report.evaluations < settings.max_evaluations) {
        // Two-loop recursion.
        direction = -g;
        const std::size_t m = s_hist.size();
        for (std::size_t i = m; i-- > 0;) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(direction);
            direction -= alpha[i] * y_hist[i];
        }
        if (m > 0) {
            direction *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        }
        for (std::size_t i = 0; i < m; ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(direction);
            direction += (alpha[i] - beta) * s_hist[i];
        }

        double slope = g.dot(direction);
        if (!(slope < 0)) {
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            direction = -g;
            slope = -g.squaredNorm();
        }

        double step = 1.0;
        if (s_hist.empty()) {
            step = std::min(1.0, 1.0 / direction.lpNorm<Eigen::Infinity>());
        }

        bool accepted = false;
        double f_trial = f;
        for (int bt = 0; bt < max_backtracks && report.evaluations < settings.max_evaluations; ++bt) {
            x_trial = x + step * direction;
            f_trial = fg(x_trial, g_trial);
            ++report.evaluations;
            if (std::isfinite(f_trial) && g_trial.allFinite() &&
                f_trial <= f + armijo_c1 * step * slope && f_trial < f) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }

        if (!accepted) {
            if (!s_hist.empty() && !retried_steepest) {
                // Stale curvature pairs can point nowhere useful; restart once.
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                retried_steepest = true;
                continue;
            }
            report.line_search_failed = report.evaluations < settings.max_evaluations;
            break;
        }
        retried_steepest = false;

        Vector s = x_trial - x;
        Vector y = g_trial - g;
        const double sy = s.dot(y);
        x = x_trial;
        g = g_trial;
        f = f_trial;
        ++report.iterations;

        if (sy > 1e-12 * y.squaredNorm() && sy > 0) {
            if (static_cast<int>(s_hist.size()) == settings.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
        }

        if (g.lpNorm<Eigen::Infinity>() < settings.gradient_tol) {
            report.converged = true;
            break;
        }
    }
    report.value = f;
    return report;
}

}  // namespace sinc
