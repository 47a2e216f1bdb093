#include "sinc/vi_regression.hpp"

#include "sinc/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace sinc {

namespace {

constexpr double kPhiFloor = 1e-12;

double xlogx(double x)
{
    return x > 0.0 ? x * std::log(x) : 0.0;
}

}  // namespace

ColumnRegressionProblem make_column_problem(const Matrix& M, const Matrix& gram,
                                            const Vector& response, double b0,
                                            double sigma_star, double theta_gamma, double nuB)
{
    if (M.rows() != response.size() || gram.rows() != M.cols() || gram.cols() != M.cols()) {
        throw Error(ErrorKind::DimensionMismatch, "column regression problem shapes differ");
    }
    if (!(sigma_star > 0)) {
        throw Error(ErrorKind::InvalidArgument, "sigma* must be positive");
    }
    const Vector centered = response.array() - b0;
    ColumnRegressionProblem prob;
    prob.Mt_response = M.transpose() * centered;
    prob.gram = &gram;
    prob.response_ss = centered.squaredNorm();
    prob.sigma_star = sigma_star;
    prob.theta_gamma = theta_gamma;
    prob.nuB = nuB;
    return prob;
}

double update_sigma_entry(const ColumnRegressionProblem& prob, Index k)
{
    return prob.sigma_star / ((*prob.gram)(k, k) + 1.0 / prob.nuB);
}

double update_mu_entry(const ColumnRegressionProblem& prob, Index k, const Vector& mu,
                       const Vector& phi, double sigma_kj)
{
    const Matrix& gram = *prob.gram;
    double cross = 0.0;
    for (Index l = 0; l < prob.q(); ++l) {
        if (l != k) {
            cross += gram(l, k) * (phi(l) * mu(l));
        }
    }
    return (sigma_kj / prob.sigma_star) * (prob.Mt_response(k) - cross);
}

double update_phi_entry(const ColumnRegressionProblem& prob, Index, double mu_kj, double sigma_kj)
{
    const double theta = prob.theta_gamma;
    const double logit = std::log(theta / (1.0 - theta)) +
                         0.5 * std::log(sigma_kj / (prob.nuB * prob.sigma_star)) +
                         mu_kj * mu_kj / (2.0 * sigma_kj);
    const double phi = 1.0 / (1.0 + std::exp(-logit));
    return std::clamp(phi, kPhiFloor, 1.0 - kPhiFloor);
}

PriorEntropyTerms column_prior_entropy(const Vector& mu, const Vector& sigma, const Vector& phi,
                                       double theta_gamma, double nuB, double sigma_star)
{
    PriorEntropyTerms t;
    const double log_theta = std::log(theta_gamma);
    const double log_not_theta = std::log1p(-theta_gamma);
    const double slab_var = nuB * sigma_star;
    const double log_slab_var = std::log(slab_var);
    for (Index k = 0; k < mu.size(); ++k) {
        const double f = phi(k);
        const double second_moment = mu(k) * mu(k) + sigma(k);
        t.prior += f * log_theta + (1.0 - f) * log_not_theta +
                   f * (-0.5 * log_slab_var - second_moment / (2.0 * slab_var));
        t.entropy += -xlogx(f) - xlogx(1.0 - f) + 0.5 * f * (1.0 + std::log(sigma(k)));
    }
    return t;
}

double expected_column_rss(const ColumnRegressionProblem& prob, const ColumnFactors& f)
{
    const Matrix& gram = *prob.gram;
    const Vector r = f.phi.cwiseProduct(f.mu);
    double rss = prob.response_ss - 2.0 * r.dot(prob.Mt_response) + r.dot(gram * r);
    for (Index k = 0; k < prob.q(); ++k) {
        const double var = f.phi(k) * f.sigma(k) + f.phi(k) * (1.0 - f.phi(k)) * f.mu(k) * f.mu(k);
        rss += gram(k, k) * var;
    }
    return rss;
}

double column_elbo(const ColumnRegressionProblem& prob, const ColumnFactors& f)
{
    const PriorEntropyTerms t =
        column_prior_entropy(f.mu, f.sigma, f.phi, prob.theta_gamma, prob.nuB, prob.sigma_star);
    return -expected_column_rss(prob, f) / (2.0 * prob.sigma_star) + t.prior + t.entropy;
}

SweepReport vi_sweep_column(const ColumnRegressionProblem& prob, ColumnFactors& f,
                            const FitConfig& cfg)
{
    SweepReport report;
    const Index q = prob.q();
    if (q == 0) {
        report.converged = true;
        return report;
    }
    double previous = column_elbo(prob, f);
    while (report.sweeps < cfg.max_inner_iters) {
        for (Index k = 0; k < q; ++k) {
            const double s = update_sigma_entry(prob, k);
            const double m = update_mu_entry(prob, k, f.mu, f.phi, s);
            f.sigma(k) = s;
            f.mu(k) = m;
            f.phi(k) = update_phi_entry(prob, k, m, s);
        }
        ++report.sweeps;
        const double current = column_elbo(prob, f);
        if (std::abs(current - previous) < cfg.inner_tol * std::max(1.0, std::abs(previous))) {
            report.converged = true;
            break;
        }
        previous = current;
    }
    return report;
}

Vector residual_variances(const Matrix& omega, ResidualVariance mode)
{
    if (mode == ResidualVariance::Conditional) {
        return omega.diagonal().cwiseInverse();
    }
    Eigen::LLT<Matrix> llt(omega);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::SingularBlock, "precision matrix is not invertible");
    }
    return llt.solve(Matrix::Identity(omega.rows(), omega.cols())).diagonal();
}

VIStepReport vi_step(const Matrix& Z, const Matrix& M, const Matrix& gram, const Matrix& omega,
                     RegressionState& state, const Hyperparameters& hp, const FitConfig& cfg,
                     ResidualVariance mode)
{
    const Index p = Z.cols();
    VIStepReport report;
    if (M.cols() == 0) {
        state.refresh_expected();
        return report;
    }
    const Vector sigma_star = residual_variances(omega, mode);

    auto solve_column = [&](Index j, const Vector& response) {
        const ColumnRegressionProblem prob = make_column_problem(
            M, gram, response, state.B0(j), sigma_star(j), state.theta_gamma(j), hp.nuB);
        ColumnFactors f{state.mu.col(j), state.sigma.col(j), state.phi.col(j)};
        const SweepReport r = vi_sweep_column(prob, f, cfg);
        state.mu.col(j) = f.mu;
        state.sigma.col(j) = f.sigma;
        state.phi.col(j) = f.phi;
        return r.converged;
    };

    if (mode == ResidualVariance::Marginal) {
        std::vector<char> converged(static_cast<std::size_t>(p), 1);
        parallel_for(p, cfg.thread_count, [&](long j) {
            converged[static_cast<std::size_t>(j)] = solve_column(j, Z.col(j)) ? 1 : 0;
        });
        for (char c : converged) {
            report.nonconverged_columns += c ? 0 : 1;
        }
    } else {
        // Expected residuals R = Z - 1 B0' - M (mu * phi), refreshed column by column.
        Matrix residual = Z - M * state.mu.cwiseProduct(state.phi);
        residual.rowwise() -= state.B0.transpose();
        for (Index j = 0; j < p; ++j) {
            const double wjj = omega(j, j);
            Vector adjust = residual * omega.col(j) - residual.col(j) * wjj;
            adjust /= wjj;
            const Vector response = Z.col(j) + adjust;
            if (!solve_column(j, response)) {
                ++report.nonconverged_columns;
            }
            residual.col(j) = Z.col(j) - M * state.mu.col(j).cwiseProduct(state.phi.col(j));
            residual.col(j).array() -= state.B0(j);
        }
    }
    state.refresh_expected();
    return report;
}

}  // namespace sinc
