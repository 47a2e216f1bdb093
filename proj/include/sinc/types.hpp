#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sinc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

enum class ErrorKind {
    DimensionMismatch,
    DegenerateColumn,
    NonFiniteEntry,
    NonFiniteResult,
    SingularBlock,
    ParseError,
    NegativeCount,
    RaggedRows,
    UniverseMismatch,
    IoError,
    InvalidArgument,
};

const char* to_string(ErrorKind kind);

/// Recoverable failure raised by any module. The kind drives the CLI exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what);
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// n x p nonnegative integer counts, one sample per row.
class CountMatrix {
public:
    CountMatrix() = default;
    /// Throws NegativeCount / NonFiniteEntry / InvalidArgument (non-integer).
    explicit CountMatrix(Matrix values, std::vector<std::string> names = {});

    const Matrix& values() const noexcept { return values_; }
    const Vector& row_totals() const noexcept { return totals_; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    Index rows() const noexcept { return values_.rows(); }
    Index cols() const noexcept { return values_.cols(); }

private:
    Matrix values_;
    Vector totals_;
    std::vector<std::string> names_;
};

/// n x q covariates. Keeps the raw values and a centered, unit-sd copy.
/// Columns with zero spread are left at zero in the scaled copy;
/// validate_inputs rejects them.
class CovariateMatrix {
public:
    CovariateMatrix() = default;
    explicit CovariateMatrix(Matrix raw, std::vector<std::string> names = {});
    static CovariateMatrix empty(Index n);

    const Matrix& raw() const noexcept { return raw_; }
    const Matrix& scaled() const noexcept { return scaled_; }
    const Vector& center() const noexcept { return center_; }
    const Vector& scale() const noexcept { return scale_; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    Index rows() const noexcept { return raw_.rows(); }
    Index cols() const noexcept { return raw_.cols(); }

private:
    Matrix raw_;
    Matrix scaled_;
    Vector center_;
    Vector scale_;
    std::vector<std::string> names_;
};

struct LatentState {
    Matrix Z;  // n x p
    Matrix alpha() const { return Z.array().exp().matrix(); }
};

/// Variational factors of the spike-and-slab regression, one per (k, j).
struct RegressionState {
    Matrix mu;     // q x p slab means
    Matrix sigma;  // q x p slab variances
    Matrix phi;    // q x p inclusion probabilities
    Matrix B;      // q x p: mu*phi while iterating, median model once finalized
    Vector B0;     // p
    Vector theta_gamma;  // p
    bool finalized = false;

    static RegressionState initial(Index q, Index p);
    Index q() const noexcept { return mu.rows(); }
    Index p() const noexcept { return mu.cols(); }
    /// B = E(B) = mu * phi.
    void refresh_expected();
    /// Check ranges of phi, sigma, theta_gamma; throws std::logic_error.
    void check_invariants() const;
};

/// B_kj = mu_kj if phi_kj > 0.5 else 0. Idempotent.
RegressionState finalize_coefficients(RegressionState state);

struct NetworkState {
    Matrix omega;   // p x p precision
    Matrix p_star;  // edge posterior probabilities, zero diagonal
    Matrix d_star;  // expected inverse mixture variances
    double pi = 0.5;
    double tau = 1.0;

    Index p() const noexcept { return omega.rows(); }
    /// Symmetric within 1e-10 and positive definite; throws std::logic_error.
    void check_invariants() const;
};

double max_asymmetry(const Matrix& m);
double min_eigenvalue(const Matrix& symmetric);

struct Hyperparameters {
    double nu0 = 0.01;   // spike sd
    double nu1 = 10.0;   // slab sd
    double lambda = 150.0;
    double nuB = 1.0;    // regression slab variance (scaled by sigma*_j)
    double a_gamma = 2.0, b_gamma = 2.0;
    double a_pi = 2.0, b_pi = 2.0;
    double a_tau = 2.0, b_tau = 2.0;
    bool learn_tau = false;

    void validate() const;
};

/// How sigma*_j, the residual variance of latent column j, is derived from Omega.
enum class ResidualVariance {
    /// 1 / Omega_jj with the response adjusted by the other columns' residuals;
    /// each column update is then an exact coordinate step on the ELBO.
    Conditional,
    /// (Omega^-1)_jj on the raw column; columns are decoupled.
    Marginal,
};

struct LbfgsSettings {
    int memory = 10;
    double gradient_tol = 1e-5;  // infinity norm
    int max_evaluations = 200;
};

struct FitConfig {
    double outer_tol = 1e-4;
    double inner_tol = 1e-6;
    int max_outer_iters = 200;
    int max_inner_iters = 100;
    LbfgsSettings lbfgs;
    int thread_count = 1;
    std::uint64_t seed = 0;
    bool constrain_B_zero = false;
    bool constrain_omega_identity = false;
    ResidualVariance residual_variance = ResidualVariance::Marginal;

    void validate() const;
};

/// Non-fatal events accumulated over a fit.
struct FitDiagnostics {
    long line_search_failures = 0;
    long clamped_rows = 0;
    long vi_nonconverged_columns = 0;
    long omega_nonconverged_loops = 0;
    long tau_fallbacks = 0;
};

struct FitResult {
    RegressionState regression;
    NetworkState network;
    LatentState latent;
    std::vector<double> elbo_trace;         // entry 0 is the initial state
    std::vector<double> omega_min_eigen;    // aligned with elbo_trace
    std::vector<double> omega_asymmetry;    // aligned with elbo_trace
    BoolMatrix selected_adjacency;          // p* > 0.5
    BoolMatrix selected_coefficients;       // phi > 0.5
    int iterations = 0;
    bool converged = false;
    FitDiagnostics diagnostics;

    double edge_sparsity() const;
};

/// Throws DimensionMismatch, DegenerateColumn or NonFiniteEntry.
void validate_inputs(const CountMatrix& X, const CovariateMatrix& M);

}  // namespace sinc
