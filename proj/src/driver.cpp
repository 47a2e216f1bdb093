#include "sinc/driver.hpp"

#include "sinc/dm_likelihood.hpp"
#include "sinc/em_network.hpp"
#include "sinc/parallel.hpp"
#include "sinc/vi_regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace sinc {

namespace {

double xlogx(double x)
{
    return x > 0.0 ? x * std::log(x) : 0.0;
}

bool regression_active(const FitConfig& cfg, Index q)
{
    return !cfg.constrain_B_zero && q > 0;
}

// sum_k (M'M)_kk Var(B_kj) for every column j.
Vector coefficient_variance(const Matrix& gram, const RegressionState& reg)
{
    const Matrix var = (reg.phi.array() * reg.sigma.array() +
                        reg.phi.array() * (1.0 - reg.phi.array()) * reg.mu.array().square())
                           .matrix();
    return var.transpose() * gram.diagonal();
}

Matrix expected_residuals(const Matrix& Z, const Matrix& M, const RegressionState& reg, bool use_b)
{
    Matrix r = Z;
    if (use_b) {
        r.noalias() -= M * reg.mu.cwiseProduct(reg.phi);
    }
    r.rowwise() -= reg.B0.transpose();
    return r;
}

Matrix expected_means(const Matrix& M, const RegressionState& reg, bool use_b, Index n)
{
    Matrix means(n, reg.B0.size());
    means.rowwise() = reg.B0.transpose();
    if (use_b) {
        means.noalias() += M * reg.mu.cwiseProduct(reg.phi);
    }
    return means;
}

DiagonalCoupling make_coupling(const RegressionState& reg, const Hyperparameters& hp)
{
    DiagonalCoupling c;
    c.log_weight = 0.5 * reg.phi.colwise().sum().transpose();
    c.linear = (reg.phi.array() * (reg.mu.array().square() + reg.sigma.array()))
                   .colwise()
                   .sum()
                   .transpose() /
               hp.nuB;
    return c;
}

void record_spectrum(FitResult& res, const Matrix& omega)
{
    res.omega_min_eigen.push_back(min_eigenvalue(omega));
    res.omega_asymmetry.push_back(max_asymmetry(omega));
}

}  // namespace

ElboBreakdown compute_elbo(const CountMatrix& X, const Matrix& M, const Matrix& gram,
                           const LatentState& latent, const RegressionState& regression,
                           const NetworkState& network, const Hyperparameters& hp,
                           const FitConfig& cfg)
{
    const Index n = X.rows();
    const Index p = X.cols();
    const Index q = M.cols();
    const bool use_b = regression_active(cfg, q);
    const Matrix& omega = network.omega;
    ElboBreakdown e;

    for (Index i = 0; i < n; ++i) {
        e.dm_term += dm_kernel_loglik(X.values().row(i).transpose(), latent.Z.row(i).transpose());
    }

    Eigen::LLT<Matrix> llt(omega);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::NonFiniteResult, "precision matrix is not positive definite");
    }
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const Matrix residual = expected_residuals(latent.Z, M, regression, use_b);
    const Matrix scatter = residual.transpose() * residual;
    e.gaussian_term = 0.5 * static_cast<double>(n) * logdet - 0.5 * omega.cwiseProduct(scatter).sum();

    if (use_b) {
        const Vector v = coefficient_variance(gram, regression);
        e.gaussian_term -= 0.5 * omega.diagonal().dot(v);
        const Vector sigma_star = residual_variances(omega, cfg.residual_variance);
        for (Index j = 0; j < p; ++j) {
            const double theta = regression.theta_gamma(j);
            const PriorEntropyTerms t =
                column_prior_entropy(regression.mu.col(j), regression.sigma.col(j),
                                     regression.phi.col(j), theta, hp.nuB, sigma_star(j));
            e.b_prior_term += t.prior + (hp.a_gamma - 1.0) * std::log(theta) +
                              (hp.b_gamma - 1.0) * std::log1p(-theta);
            e.entropy_term += t.entropy;
        }
    }

    if (!cfg.constrain_omega_identity) {
        const double log_nu0 = std::log(hp.nu0);
        const double log_nu1 = std::log(hp.nu1);
        const double inv_var0 = 1.0 / (hp.nu0 * hp.nu0);
        const double inv_var1 = 1.0 / (hp.nu1 * hp.nu1);
        const double tau = network.tau;
        const double log_pi = std::log(network.pi);
        const double log_not_pi = std::log1p(-network.pi);
        for (Index j = 0; j < p; ++j) {
            for (Index i = 0; i < j; ++i) {
                const double ps = network.p_star(i, j);
                const double w = omega(i, j);
                e.omega_prior_term += -(1.0 - ps) * log_nu0 - ps * log_nu1 -
                                      0.5 * tau * w * w * ((1.0 - ps) * inv_var0 + ps * inv_var1);
                e.edge_prior_term +=
                    ps * log_pi + (1.0 - ps) * log_not_pi - xlogx(ps) - xlogx(1.0 - ps);
            }
        }
        e.omega_prior_term -= 0.5 * hp.lambda * omega.trace();
        // Arranged so the closed-form tau update maximizes these terms exactly.
        const double pairs = 0.5 * static_cast<double>(p) * static_cast<double>(p - 1);
        e.omega_prior_term += pairs * std::log(tau);
        if (hp.learn_tau) {
            e.omega_prior_term += (hp.a_tau - 1.0) * std::log(tau) - (hp.b_tau - 2.0) * tau;
        }
        e.edge_prior_term += (hp.a_pi - 1.0) * log_pi + (hp.b_pi - 1.0) * log_not_pi;
    }

    e.total = e.dm_term + e.gaussian_term + e.b_prior_term + e.omega_prior_term +
              e.edge_prior_term + e.entropy_term;
    if (!std::isfinite(e.total)) {
        throw Error(ErrorKind::NonFiniteResult, "objective is not finite; the fit diverged");
    }
    return e;
}

FitResult fit_once(const CountMatrix& X, const CovariateMatrix& M, const Hyperparameters& hp,
                   const FitConfig& cfg)
{
    hp.validate();
    cfg.validate();
    validate_inputs(X, M);

    const Matrix& Ms = M.scaled();
    const Matrix gram = Ms.transpose() * Ms;
    const Index n = X.rows();
    const Index p = X.cols();
    const Index q = Ms.cols();
    const bool use_b = regression_active(cfg, q);
    const bool free_omega = !cfg.constrain_omega_identity;
    const double nd = static_cast<double>(n);

    FitResult res;
    LatentState latent{(X.values().array() + 1.0).log().matrix()};
    RegressionState reg = RegressionState::initial(q, p);
    if (!use_b) {
        reg.phi.setZero();
        reg.refresh_expected();
    }
    NetworkState net;
    net.omega = free_omega ? initial_precision(latent.Z) : Matrix::Identity(p, p);
    net.p_star = Matrix::Zero(p, p);
    net.d_star = Matrix::Zero(p, p);
    reg.B0 = update_intercepts(latent.Z, Ms, reg.B);

    if (use_b) {
        const VIStepReport r =
            vi_step(latent.Z, Ms, gram, net.omega, reg, hp, cfg, ResidualVariance::Marginal);
        res.diagnostics.vi_nonconverged_columns += r.nonconverged_columns;
    }
    if (free_omega) {
        e_step(net, hp, cfg.thread_count);
    }
    res.elbo_trace.push_back(compute_elbo(X, Ms, gram, latent, reg, net, hp, cfg).total);
    record_spectrum(res, net.omega);

    for (int it = 0; it < cfg.max_outer_iters; ++it) {
        if (use_b) {
            const VIStepReport r =
                vi_step(latent.Z, Ms, gram, net.omega, reg, hp, cfg, cfg.residual_variance);
            res.diagnostics.vi_nonconverged_columns += r.nonconverged_columns;
        }
        if (free_omega) {
            e_step(net, hp, cfg.thread_count);
        }

        reg.B0 = update_intercepts(latent.Z, Ms, reg.B);
        if (free_omega) {
            const Matrix residual = expected_residuals(latent.Z, Ms, reg, use_b);
            ResidualScatter scat;
            scat.S = residual.transpose() * residual;
            std::optional<DiagonalCoupling> coupling;
            if (use_b) {
                scat.S.diagonal() += coefficient_variance(gram, reg);
                if (cfg.residual_variance == ResidualVariance::Conditional) {
                    coupling = make_coupling(reg, hp);
                }
            }
            const PrecisionLoopReport r =
                update_precision(net, scat, nd, hp, cfg, coupling ? &*coupling : nullptr);
            res.diagnostics.omega_nonconverged_loops += r.converged ? 0 : 1;
        }
        if (use_b) {
            reg.theta_gamma = update_theta_gamma(reg.phi, hp);
        }
        if (free_omega) {
            net.pi = update_pi(net.p_star, hp);
            if (hp.learn_tau) {
                const TauUpdate t =
                    update_tau(net.omega, tau_free_weights(net.p_star, hp), hp, net.tau);
                net.tau = t.tau;
                res.diagnostics.tau_fallbacks += t.fallback ? 1 : 0;
            }
        }
        LatentStepReport zr;
        latent = optimize_latent(X, expected_means(Ms, reg, use_b, n), net.omega, latent, cfg, &zr);
        res.diagnostics.line_search_failures += zr.line_search_failures;
        res.diagnostics.clamped_rows += zr.clamped_rows;

        const double elbo = compute_elbo(X, Ms, gram, latent, reg, net, hp, cfg).total;
        const double previous = res.elbo_trace.back();
        res.elbo_trace.push_back(elbo);
        record_spectrum(res, net.omega);
        res.iterations = it + 1;
        if (std::abs(elbo - previous) < cfg.outer_tol * std::abs(elbo)) {
            res.converged = true;
            break;
        }
    }

    res.regression = finalize_coefficients(reg);
    res.selected_coefficients = (reg.phi.array() > 0.5).matrix();
    res.selected_adjacency = (net.p_star.array() > 0.5).matrix();
    res.network = std::move(net);
    res.latent = std::move(latent);
    return res;
}

std::optional<double> GridResult::auc() const
{
    std::vector<RocPoint> points;
    for (const GridPoint& g : fits) {
        if (!g.roc) {
            return std::nullopt;
        }
        points.push_back(*g.roc);
    }
    if (points.empty()) {
        return std::nullopt;
    }
    return roc_auc(points);
}

std::vector<double> default_nu0_grid()
{
    constexpr int kPoints = 20;
    std::vector<double> grid(kPoints);
    for (int k = 0; k < kPoints; ++k) {
        grid[k] = std::pow(10.0, -4.0 + 3.0 * k / (kPoints - 1));
    }
    grid.front() = 1e-4;
    grid.back() = 1e-1;
    return grid;
}

GridResult fit_grid(const CountMatrix& X, const CovariateMatrix& M, const Hyperparameters& hp_base,
                    const FitConfig& cfg, const std::vector<double>& nu0_grid,
                    double sparsity_target, const BoolMatrix* truth)
{
    if (nu0_grid.empty()) {
        throw Error(ErrorKind::InvalidArgument, "nu0 grid is empty");
    }
    if (truth != nullptr && (truth->rows() != X.cols() || truth->cols() != X.cols())) {
        throw Error(ErrorKind::UniverseMismatch, "truth adjacency does not match the count columns");
    }
    const long points = static_cast<long>(nu0_grid.size());
    const int outer_threads = static_cast<int>(std::min<long>(cfg.thread_count, points));
    FitConfig inner = cfg;
    if (outer_threads > 1) {
        inner.thread_count = 1;
    }

    GridResult out;
    out.nu0_values = nu0_grid;
    out.fits.resize(nu0_grid.size());
    parallel_for(points, outer_threads, [&](long k) {
        Hyperparameters hp = hp_base;
        hp.nu0 = nu0_grid[static_cast<std::size_t>(k)];
        GridPoint& g = out.fits[static_cast<std::size_t>(k)];
        g.nu0 = hp.nu0;
        g.fit = fit_once(X, M, hp, inner);
        g.sparsity = g.fit.edge_sparsity();
        g.elbo = g.fit.elbo_trace.back();
        if (truth != nullptr) {
            const Scores s = scores(edge_confusion(g.fit.selected_adjacency, *truth));
            g.roc = RocPoint{s.fpr, s.tpr};
        }
    });

    for (std::size_t k = 1; k < out.fits.size(); ++k) {
        const GridPoint& best = out.fits[out.selected_index];
        const double dk = std::abs(out.fits[k].sparsity - sparsity_target);
        const double db = std::abs(best.sparsity - sparsity_target);
        if (dk < db || (dk == db && out.fits[k].nu0 < best.nu0)) {
            out.selected_index = k;
        }
    }
    return out;
}

}  // namespace sinc
