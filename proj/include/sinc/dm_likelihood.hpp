#pragma once

#include "sinc/types.hpp"

namespace sinc {

/// Latent values above this are evaluated as if equal to it (exp overflow guard).
inline constexpr double kLatentClamp = 30.0;

/// Per-row data for the latent objective: counts, prior mean B0 + M_i B, and Omega.
struct RowObjectiveContext {
    Vector x_row;
    Vector mean_row;
    const Matrix* omega = nullptr;
};

/// Dirichlet-multinomial log-likelihood of one row with alpha = exp(z), without
/// the multinomial coefficient (constant in z).
double dm_kernel_loglik(const Vector& x_row, const Vector& z_row);

/// Negative log posterior of one latent row, up to terms constant in z:
/// -dm_kernel_loglik(x, z) + 0.5 (z - m)' Omega (z - m).
double z_objective_row(const RowObjectiveContext& ctx, const Vector& z_row);

/// Analytic gradient of z_objective_row.
Vector z_gradient_row(const RowObjectiveContext& ctx, const Vector& z_row);

/// Objective and gradient in one pass (shares the special-function work).
double z_objective_and_gradient(const RowObjectiveContext& ctx, const Vector& z_row, Vector& grad);

struct LatentStepReport {
    long line_search_failures = 0;
    long clamped_rows = 0;
};

/// Re-optimizes every latent row, warm-started from Z_init. Rows are
/// independent and run in parallel; no row objective increases.
LatentState optimize_latent(const CountMatrix& X, const Matrix& means, const Matrix& omega,
                            const LatentState& Z_init, const FitConfig& cfg,
                            LatentStepReport* report = nullptr);

}  // namespace sinc
