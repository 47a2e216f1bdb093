#pragma once

#include "sinc/types.hpp"

namespace sinc {

/// Sufficient statistics for the spike-and-slab regression of one latent
/// column y on the scaled covariates, with residual variance sigma_star.
struct ColumnRegressionProblem {
    Vector Mt_response;          // M'(y - b0)
    const Matrix* gram = nullptr;  // M'M
    double response_ss = 0.0;    // ||y - b0||^2, only needed for column_elbo
    double sigma_star = 1.0;
    double theta_gamma = 0.5;
    double nuB = 1.0;

    Index q() const noexcept { return Mt_response.size(); }
};

ColumnRegressionProblem make_column_problem(const Matrix& M, const Matrix& gram,
                                            const Vector& response, double b0,
                                            double sigma_star, double theta_gamma, double nuB);

/// sigma_kj = sigma* / ((M'M)_kk + 1/nuB).
double update_sigma_entry(const ColumnRegressionProblem& prob, Index k);

/// mu_kj = (sigma_kj / sigma*) [ {M'(y - b0)}_k - sum_{l != k} (M'M)_lk phi_l mu_l ].
double update_mu_entry(const ColumnRegressionProblem& prob, Index k, const Vector& mu,
                       const Vector& phi, double sigma_kj);

/// Posterior inclusion odds of the slab; clamped to [1e-12, 1 - 1e-12].
double update_phi_entry(const ColumnRegressionProblem& prob, Index k, double mu_kj,
                        double sigma_kj);

struct ColumnFactors {
    Vector mu;
    Vector sigma;
    Vector phi;
};

struct PriorEntropyTerms {
    double prior = 0.0;    // E log p(B, gamma | theta), slab variance nuB * sigma*
    double entropy = 0.0;  // -E log q(B, gamma)
};

/// Slab/spike prior and variational entropy of one column (constants that
/// cancel between the two are dropped).
PriorEntropyTerms column_prior_entropy(const Vector& mu, const Vector& sigma, const Vector& phi,
                                       double theta_gamma, double nuB, double sigma_star);

/// Expected residual sum of squares sum_i E (y_i - b0 - M_i B)^2 under q.
double expected_column_rss(const ColumnRegressionProblem& prob, const ColumnFactors& f);

/// Column-local ELBO: Gaussian likelihood with variance sigma* plus
/// column_prior_entropy. Every entry update below is its exact maximizer.
double column_elbo(const ColumnRegressionProblem& prob, const ColumnFactors& f);

struct SweepReport {
    int sweeps = 0;
    bool converged = false;
};

/// Coordinate sweeps k = 0..q-1 (sigma, mu, phi per entry) until the
/// column ELBO changes by less than inner_tol relative, or max_inner_iters.
SweepReport vi_sweep_column(const ColumnRegressionProblem& prob, ColumnFactors& f,
                            const FitConfig& cfg);

/// sigma*_j for every column under the configured residual-variance mode.
Vector residual_variances(const Matrix& omega, ResidualVariance mode);

struct VIStepReport {
    long nonconverged_columns = 0;
};

/// The whole VI step: sweeps every response column and sets B = mu * phi.
///
/// Conditional mode visits columns in order and regresses
/// y_j = Z_j + (1/Omega_jj) sum_{l != j} Omega_jl (Z_l - B0_l - M B_l) with
/// sigma*_j = 1/Omega_jj, so each column update is exact on the joint
/// Gaussian term. Marginal mode regresses Z_j directly and runs columns in
/// parallel.
VIStepReport vi_step(const Matrix& Z, const Matrix& M, const Matrix& gram, const Matrix& omega,
                     RegressionState& state, const Hyperparameters& hp, const FitConfig& cfg,
                     ResidualVariance mode);

}  // namespace sinc
