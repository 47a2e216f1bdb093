#pragma once

#include "sinc/metrics.hpp"
#include "sinc/types.hpp"

#include <optional>
#include <vector>

namespace sinc {

struct ElboBreakdown {
    double dm_term = 0.0;
    double gaussian_term = 0.0;
    double b_prior_term = 0.0;
    double omega_prior_term = 0.0;
    double edge_prior_term = 0.0;
    double entropy_term = 0.0;
    double total = 0.0;
};

/// Evaluates the objective at the current states. Z, B0, Omega, pi, tau and
/// theta_gamma are point masses; only (B, gamma) contribute entropy.
/// M is the scaled covariate matrix and gram = M'M.
/// Throws NonFiniteResult if any term is not finite.
ElboBreakdown compute_elbo(const CountMatrix& X, const Matrix& M, const Matrix& gram,
                           const LatentState& latent, const RegressionState& regression,
                           const NetworkState& network, const Hyperparameters& hp,
                           const FitConfig& cfg);

FitResult fit_once(const CountMatrix& X, const CovariateMatrix& M, const Hyperparameters& hp,
                   const FitConfig& cfg);

struct GridPoint {
    double nu0 = 0.0;
    FitResult fit;
    double sparsity = 0.0;
    double elbo = 0.0;
    std::optional<RocPoint> roc;  // only when truth is given
};

struct GridResult {
    std::vector<double> nu0_values;
    std::vector<GridPoint> fits;
    std::size_t selected_index = 0;

    const GridPoint& selected() const { return fits.at(selected_index); }
    /// Area under the (fpr, tpr) points; requires truth.
    std::optional<double> auc() const;
};

/// 20 log-spaced values from 1e-4 to 1e-1.
std::vector<double> default_nu0_grid();
inline constexpr double kDefaultSparsityTarget = 0.10;

/// One independent fit per nu0, run in parallel over grid points. Picks the
/// fit whose edge sparsity is nearest sparsity_target (ties: smaller nu0).
GridResult fit_grid(const CountMatrix& X, const CovariateMatrix& M, const Hyperparameters& hp_base,
                    const FitConfig& cfg, const std::vector<double>& nu0_grid,
                    double sparsity_target, const BoolMatrix* truth = nullptr);

}  // namespace sinc
