#include "sinc/types.hpp"

#include <cmath>
#include <sstream>

namespace sinc {

const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DegenerateColumn: return "DegenerateColumn";
    case ErrorKind::NonFiniteEntry: return "NonFiniteEntry";
    case ErrorKind::NonFiniteResult: return "NonFiniteResult";
    case ErrorKind::SingularBlock: return "SingularBlock";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::NegativeCount: return "NegativeCount";
    case ErrorKind::RaggedRows: return "RaggedRows";
    case ErrorKind::UniverseMismatch: return "UniverseMismatch";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
{
}

namespace {

std::vector<std::string> default_names(const char* prefix, Index count)
{
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) {
        out.push_back(prefix + std::to_string(i + 1));
    }
    return out;
}

}  // namespace

CountMatrix::CountMatrix(Matrix values, std::vector<std::string> names)
    : values_(std::move(values)), names_(std::move(names))
{
    for (Index i = 0; i < values_.rows(); ++i) {
        for (Index j = 0; j < values_.cols(); ++j) {
            const double v = values_(i, j);
            if (!std::isfinite(v)) {
                throw Error(ErrorKind::NonFiniteEntry, "count at (" + std::to_string(i + 1) + "," +
                                                           std::to_string(j + 1) + ")");
            }
            if (v < 0) {
                throw Error(ErrorKind::NegativeCount, "count at (" + std::to_string(i + 1) + "," +
                                                          std::to_string(j + 1) + ")");
            }
            if (v != std::floor(v)) {
                throw Error(ErrorKind::InvalidArgument, "non-integer count at (" +
                                                            std::to_string(i + 1) + "," +
                                                            std::to_string(j + 1) + ")");
            }
        }
    }
    if (names_.empty()) {
        names_ = default_names("taxon_", values_.cols());
    }
    if (static_cast<Index>(names_.size()) != values_.cols()) {
        throw Error(ErrorKind::DimensionMismatch, "count column names do not match column count");
    }
    totals_ = values_.rowwise().sum();
}

CovariateMatrix::CovariateMatrix(Matrix raw, std::vector<std::string> names)
    : raw_(std::move(raw)), names_(std::move(names))
{
    const Index n = raw_.rows();
    const Index q = raw_.cols();
    if (names_.empty()) {
        names_ = default_names("covariate_", q);
    }
    if (static_cast<Index>(names_.size()) != q) {
        throw Error(ErrorKind::DimensionMismatch, "covariate names do not match column count");
    }
    center_ = Vector::Zero(q);
    scale_ = Vector::Zero(q);
    scaled_ = Matrix::Zero(n, q);
    if (n < 2) {
        return;
    }
    for (Index k = 0; k < q; ++k) {
        const double mean = raw_.col(k).mean();
        const double ss = (raw_.col(k).array() - mean).square().sum();
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        center_(k) = mean;
        scale_(k) = sd;
        if (sd > 0 && std::isfinite(sd)) {
            scaled_.col(k) = (raw_.col(k).array() - mean) / sd;
        }
    }
}

CovariateMatrix CovariateMatrix::empty(Index n)
{
    return CovariateMatrix(Matrix(n, 0));
}

RegressionState RegressionState::initial(Index q, Index p)
{
    RegressionState s;
    s.mu = Matrix::Zero(q, p);
    s.sigma = Matrix::Ones(q, p);
    s.phi = Matrix::Constant(q, p, 0.5);
    s.B = Matrix::Zero(q, p);
    s.B0 = Vector::Zero(p);
    s.theta_gamma = Vector::Constant(p, 0.5);
    return s;
}

void RegressionState::refresh_expected()
{
    B = mu.cwiseProduct(phi);
    finalized = false;
}

void RegressionState::check_invariants() const
{
    if ((phi.array() < 0.0).any() || (phi.array() > 1.0).any()) {
        throw std::logic_error("phi outside [0,1]");
    }
    if ((sigma.array() <= 0.0).any()) {
        throw std::logic_error("nonpositive slab variance");
    }
    if ((theta_gamma.array() <= 0.0).any() || (theta_gamma.array() >= 1.0).any()) {
        throw std::logic_error("theta_gamma outside (0,1)");
    }
}

RegressionState finalize_coefficients(RegressionState state)
{
    state.B = (state.phi.array() > 0.5).select(state.mu, 0.0);
    state.finalized = true;
    return state;
}

double max_asymmetry(const Matrix& m)
{
    if (m.size() == 0) {
        return 0.0;
    }
    return (m - m.transpose()).cwiseAbs().maxCoeff();
}

double min_eigenvalue(const Matrix& symmetric)
{
    if (symmetric.size() == 0) {
        return 0.0;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

void NetworkState::check_invariants() const
{
    if (omega.rows() != omega.cols()) {
        throw std::logic_error("precision matrix is not square");
    }
    const double asym = max_asymmetry(omega);
    if (!(asym <= 1e-10)) {
        std::ostringstream os;
        os << "precision matrix asymmetric (max " << asym << ")";
        throw std::logic_error(os.str());
    }
    Eigen::LLT<Matrix> llt(omega);
    if (llt.info() != Eigen::Success) {
        throw std::logic_error("precision matrix not positive definite");
    }
}

void Hyperparameters::validate() const
{
    const double all[] = {nu0, nu1, lambda, nuB, a_gamma, b_gamma, a_pi, b_pi, a_tau, b_tau};
    for (double v : all) {
        if (!(v > 0) || !std::isfinite(v)) {
            throw Error(ErrorKind::InvalidArgument, "hyperparameters must be finite and positive");
        }
    }
    if (!(nu0 < nu1)) {
        throw Error(ErrorKind::InvalidArgument, "nu0 must be smaller than nu1");
    }
}

void FitConfig::validate() const
{
    if (!(outer_tol > 0) || !(inner_tol > 0)) {
        throw Error(ErrorKind::InvalidArgument, "tolerances must be positive");
    }
    if (max_outer_iters <= 0 || max_inner_iters <= 0 || thread_count <= 0) {
        throw Error(ErrorKind::InvalidArgument, "iteration limits and thread count must be positive");
    }
    if (lbfgs.memory <= 0 || lbfgs.max_evaluations <= 0 || !(lbfgs.gradient_tol > 0)) {
        throw Error(ErrorKind::InvalidArgument, "invalid L-BFGS settings");
    }
    if (constrain_B_zero && constrain_omega_identity) {
        throw Error(ErrorKind::InvalidArgument,
                    "constrain_B_zero and constrain_omega_identity are mutually exclusive");
    }
}

double FitResult::edge_sparsity() const
{
    const Index p = selected_adjacency.rows();
    if (p < 2) {
        return 0.0;
    }
    long edges = 0;
    for (Index i = 0; i < p; ++i) {
        for (Index j = i + 1; j < p; ++j) {
            edges += selected_adjacency(i, j) ? 1 : 0;
        }
    }
    return static_cast<double>(edges) / (0.5 * static_cast<double>(p * (p - 1)));
}

void validate_inputs(const CountMatrix& X, const CovariateMatrix& M)
{
    if (X.rows() != M.rows()) {
        throw Error(ErrorKind::DimensionMismatch, "counts have " + std::to_string(X.rows()) +
                                                      " rows but covariates have " +
                                                      std::to_string(M.rows()));
    }
    if (X.rows() == 0 || X.cols() == 0) {
        throw Error(ErrorKind::DimensionMismatch, "empty count matrix");
    }
    for (Index j = 0; j < X.cols(); ++j) {
        if (X.values().col(j).sum() == 0.0) {
            throw Error(ErrorKind::DegenerateColumn,
                        "count column " + std::to_string(j + 1) + " is all zeros");
        }
    }
    for (Index i = 0; i < M.rows(); ++i) {
        for (Index k = 0; k < M.cols(); ++k) {
            if (!std::isfinite(M.raw()(i, k))) {
                throw Error(ErrorKind::NonFiniteEntry, "covariate at (" + std::to_string(i + 1) +
                                                           "," + std::to_string(k + 1) + ")");
            }
        }
    }
    for (Index k = 0; k < M.cols(); ++k) {
        if (!(M.scale()(k) > 0)) {
            throw Error(ErrorKind::DegenerateColumn,
                        "covariate column " + std::to_string(k + 1) + " is constant");
        }
    }
}

}  // namespace sinc
