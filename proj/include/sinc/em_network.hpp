#pragma once

#include "sinc/types.hpp"

namespace sinc {

struct EdgePosterior {
    double p_star = 0.0;
    double d_star = 0.0;
};

/// Posterior edge probability and expected inverse mixture variance for one
/// off-diagonal entry. Components are Normal(0, nu^2 / tau).
EdgePosterior e_step_edge(double omega_ij, double pi, double tau, const Hyperparameters& hp);

/// Refreshes p_star and d_star for all pairs from the current omega, pi, tau.
void e_step(NetworkState& net, const Hyperparameters& hp, int threads = 1);

/// B0_j = mean_i (Z_ij - M_i B_j).
Vector update_intercepts(const Matrix& Z, const Matrix& M, const Matrix& B);

/// S = (Z - M B - 1 B0')'(Z - M B - 1 B0'), optionally plus a diagonal term
/// (the expected scatter under q(B) adds sum_k (M'M)_kk Var(B_kj) at (j, j)).
struct ResidualScatter {
    Matrix S;

    static ResidualScatter from_residuals(const Matrix& Z, const Matrix& M, const Matrix& B,
                                          const Vector& B0);
};

/// Extra terms a diagonal entry picks up from other blocks of the objective:
/// log_weight(j) * log(omega_jj) - 0.5 * linear(j) * omega_jj.
struct DiagonalCoupling {
    Vector log_weight;
    Vector linear;
};

struct PrecisionColumn {
    Vector omega12;
    double omega22 = 0.0;
};

/// One block-coordinate update of column `col` (others held fixed):
/// omega12 = -((s22 + lambda) Omega11^-1 + diag(d*_12))^-1 s12,
/// omega22 = omega12' Omega11^-1 omega12 + n / (lambda + s22).
/// With a coupling, the column maximizes the augmented objective and never
/// lowers it. Writes the column and its mirror row into net.omega.
PrecisionColumn update_precision_column(NetworkState& net, const ResidualScatter& scat, Index col,
                                        double n, const Hyperparameters& hp,
                                        const DiagonalCoupling* coupling = nullptr);

struct PrecisionLoopReport {
    int cycles = 0;
    bool converged = false;
};

/// Cycles update_precision_column over all columns with d_star fixed until the
/// largest entry change is below inner_tol or max_inner_iters cycles.
PrecisionLoopReport update_precision(NetworkState& net, const ResidualScatter& scat, double n,
                                     const Hyperparameters& hp, const FitConfig& cfg,
                                     const DiagonalCoupling* coupling = nullptr);

/// Penalized objective maximized by the precision loop:
/// n/2 log|Omega| - 1/2 tr(S Omega) - lambda/2 sum_i omega_ii
///   - 1/2 sum_{i<j} d*_ij omega_ij^2 (+ coupling terms).
double precision_objective(const Matrix& omega, const ResidualScatter& scat, double n,
                           const Matrix& d_star, const Hyperparameters& hp,
                           const DiagonalCoupling* coupling = nullptr);

/// theta_gamma_j = (sum_k phi_kj + a - 1) / (q + a + b - 2), clamped to (1e-6, 1 - 1e-6).
Vector update_theta_gamma(const Matrix& phi, const Hyperparameters& hp);

/// pi = (a + sum_{i<j} p*_ij - 1) / (a + b + p(p-1)/2 - 2).
double update_pi(const Matrix& p_star, const Hyperparameters& hp);

/// tau-free mixture weights (1 - p*)/nu0^2 + p*/nu1^2.
Matrix tau_free_weights(const Matrix& p_star, const Hyperparameters& hp);

struct TauUpdate {
    double tau = 1.0;
    bool fallback = false;
};

/// tau = (a_tau - 1 + p(p-1)/2) / (b_tau - 2 + 1/2 sum_{i<j} omega_ij^2 w_ij).
/// A nonpositive denominator or numerator keeps previous_tau.
TauUpdate update_tau(const Matrix& omega, const Matrix& weights, const Hyperparameters& hp,
                     double previous_tau);

/// Sigma = Z~'Z~ / N of the column-centered Z and its inverse, adding
/// 1e-3 * mean(diag) ridge until the Cholesky factorization succeeds.
Matrix initial_precision(const Matrix& Z);

}  // namespace sinc
