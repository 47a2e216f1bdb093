#include "sinc/em_network.hpp"

#include "sinc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace sinc {

EdgePosterior e_step_edge(double omega_ij, double pi, double tau, const Hyperparameters& hp)
{
    const double inv_var0 = 1.0 / (hp.nu0 * hp.nu0);
    const double inv_var1 = 1.0 / (hp.nu1 * hp.nu1);
    // log N(omega | 0, nu1^2/tau) - log N(omega | 0, nu0^2/tau)
    const double log_ratio =
        std::log(hp.nu0 / hp.nu1) + 0.5 * tau * omega_ij * omega_ij * (inv_var0 - inv_var1);

    EdgePosterior out;
    if (log_ratio == 0.0) {
        out.p_star = pi;  // indistinguishable components: posterior equals prior
    } else {
        const double log_odds = std::log(pi) - std::log1p(-pi) + log_ratio;
        out.p_star = 1.0 / (1.0 + std::exp(-log_odds));
    }
    out.d_star = tau * ((1.0 - out.p_star) * inv_var0 + out.p_star * inv_var1);
    return out;
}

void e_step(NetworkState& net, const Hyperparameters& hp, int threads)
{
    const Index p = net.p();
    net.p_star.setZero(p, p);
    net.d_star.resize(p, p);
    parallel_for(p, threads, [&](long i) {
        for (Index j = 0; j < p; ++j) {
            if (j == i) {
                net.d_star(i, i) = 0.0;
                continue;
            }
            // Evaluate on the upper-triangle entry so both halves agree bitwise.
            const Index a = std::min<Index>(i, j);
            const Index b = std::max<Index>(i, j);
            const EdgePosterior e = e_step_edge(net.omega(a, b), net.pi, net.tau, hp);
            net.p_star(i, j) = e.p_star;
            net.d_star(i, j) = e.d_star;
        }
    });
}

Vector update_intercepts(const Matrix& Z, const Matrix& M, const Matrix& B)
{
    if (M.rows() != Z.rows() || B.rows() != M.cols() || B.cols() != Z.cols()) {
        throw Error(ErrorKind::DimensionMismatch, "update_intercepts: inconsistent shapes");
    }
    if (M.cols() == 0) {
        return Z.colwise().mean().transpose();
    }
    return (Z - M * B).colwise().mean().transpose();
}

ResidualScatter ResidualScatter::from_residuals(const Matrix& Z, const Matrix& M, const Matrix& B,
                                                const Vector& B0)
{
    Matrix residual = Z;
    if (M.cols() > 0) {
        residual -= M * B;
    }
    residual.rowwise() -= B0.transpose();
    ResidualScatter out;
    out.S = residual.transpose() * residual;
    return out;
}

namespace {

struct ColumnBlock {
    const Matrix& omega11_inv;
    Vector s12;
    double s22 = 0.0;
    Vector d12;
    double log_weight = 0.0;
    double linear = 0.0;
};

// Maximizer over v > 0 of n/2 log v + L log(v + c) - A/2 v.
double optimal_schur(double n, double L, double A, double c)
{
    if (L == 0.0) {
        return n / A;
    }
    const double b = A * c - n - 2.0 * L;
    const double disc = b * b + 4.0 * A * n * c;
    // Stable positive root of A v^2 + b v - n c = 0.
    if (b <= 0) {
        return (-b + std::sqrt(disc)) / (2.0 * A);
    }
    return (2.0 * n * c) / (b + std::sqrt(disc));
}

PrecisionColumn solve_block(const ColumnBlock& blk, double n, double lambda, const Vector& old12,
                            double old22)
{
    const Matrix& W = blk.omega11_inv;
    const double A = blk.s22 + lambda + blk.linear;
    const Index m = blk.s12.size();

    PrecisionColumn out;
    if (m == 0) {
        out.omega12 = Vector(0);
        out.omega22 = optimal_schur(n, blk.log_weight, A, 0.0);
        return out;
    }

    Matrix system = A * W;
    system.diagonal() += blk.d12;
    Eigen::LLT<Matrix> llt(system);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::SingularBlock,
                    "precision column system is not positive definite (lambda too small?)");
    }
    Vector candidate = -llt.solve(blk.s12);
    if (!candidate.allFinite()) {
        throw Error(ErrorKind::SingularBlock, "precision column solve produced non-finite values");
    }

    if (blk.log_weight == 0.0) {
        out.omega12 = std::move(candidate);
        out.omega22 = out.omega12.dot(W * out.omega12) + n / A;
        return out;
    }

    // With the log(omega22) coupling, profile out the Schur complement v. The
    // profiled objective is concave in omega12 and stationary where
    // (n/v W + D) omega12 = -s12, so iterate that solve with backtracking.
    auto objective = [&](const Vector& w12, double v) {
        const double c = w12.dot(W * w12);
        return 0.5 * n * std::log(v) + blk.log_weight * std::log(v + c) - 0.5 * A * (v + c) -
               blk.s12.dot(w12) - 0.5 * (blk.d12.array() * w12.array().square()).sum();
    };
    struct Profiled {
        double value;
        double v;
        double diag;
    };
    auto profile = [&](const Vector& w12) {
        const double c = w12.dot(W * w12);
        const double v = optimal_schur(n, blk.log_weight, A, c);
        return Profiled{objective(w12, v), v, v + c};
    };

    const double c_old = old12.dot(W * old12);
    const double v_old = old22 - c_old;
    const double current =
        v_old > 0 ? objective(old12, v_old) : -std::numeric_limits<double>::infinity();

    Vector u = old12;
    Profiled best = profile(old12);
    if (const Profiled cand = profile(candidate); cand.value >= best.value) {
        u = std::move(candidate);
        best = cand;
    }
    for (int iter = 0; iter < 100; ++iter) {
        Matrix sys = (n / best.v) * W;
        sys.diagonal() += blk.d12;
        Eigen::LLT<Matrix> step_llt(sys);
        if (step_llt.info() != Eigen::Success) {
            break;
        }
        const Vector direction = -step_llt.solve(blk.s12) - u;
        if (!direction.allFinite()) {
            break;
        }
        double t = 1.0;
        bool moved = false;
        for (int attempt = 0; attempt < 40; ++attempt, t *= 0.5) {
            const Vector trial = u + t * direction;
            const Profiled next = profile(trial);
            if (next.value >= best.value) {
                const double gain = next.value - best.value;
                u = trial;
                best = next;
                moved = gain > 1e-15 * std::abs(best.value);
                break;
            }
        }
        if (!moved || t * direction.norm() <= 1e-13 * (1.0 + u.norm())) {
            break;
        }
    }
    if (best.value < current) {
        out.omega12 = old12;
        out.omega22 = old22;
        return out;
    }
    out.omega12 = std::move(u);
    out.omega22 = best.diag;
    return out;
}

std::vector<Index> others(Index p, Index col)
{
    std::vector<Index> idx;
    idx.reserve(static_cast<std::size_t>(p > 0 ? p - 1 : 0));
    for (Index i = 0; i < p; ++i) {
        if (i != col) {
            idx.push_back(i);
        }
    }
    return idx;
}

ColumnBlock make_block(const Matrix& W, const NetworkState& net, const ResidualScatter& scat,
                       Index col, const std::vector<Index>& idx, const DiagonalCoupling* coupling)
{
    ColumnBlock blk{W, scat.S(idx, col), scat.S(col, col), net.d_star(idx, col)};
    if (coupling != nullptr) {
        blk.log_weight = coupling->log_weight(col);
        blk.linear = coupling->linear(col);
    }
    return blk;
}

void write_column(Matrix& omega, Index col, const std::vector<Index>& idx,
                  const PrecisionColumn& c)
{
    for (std::size_t a = 0; a < idx.size(); ++a) {
        omega(idx[a], col) = c.omega12(static_cast<Index>(a));
        omega(col, idx[a]) = c.omega12(static_cast<Index>(a));
    }
    omega(col, col) = c.omega22;
}

void check_shapes(const NetworkState& net, const ResidualScatter& scat)
{
    const Index p = net.p();
    if (scat.S.rows() != p || scat.S.cols() != p || net.d_star.rows() != p ||
        net.d_star.cols() != p) {
        throw Error(ErrorKind::DimensionMismatch, "precision update: inconsistent shapes");
    }
}

}  // namespace

PrecisionColumn update_precision_column(NetworkState& net, const ResidualScatter& scat, Index col,
                                        double n, const Hyperparameters& hp,
                                        const DiagonalCoupling* coupling)
{
    check_shapes(net, scat);
    const Index p = net.p();
    const std::vector<Index> idx = others(p, col);
    Matrix W;
    if (p > 1) {
        const Matrix omega11 = net.omega(idx, idx);
        Eigen::LLT<Matrix> llt(omega11);
        if (llt.info() != Eigen::Success) {
            throw Error(ErrorKind::SingularBlock, "Omega11 is not positive definite");
        }
        W = llt.solve(Matrix::Identity(p - 1, p - 1));
    } else {
        W.resize(0, 0);
    }
    const ColumnBlock blk = make_block(W, net, scat, col, idx, coupling);
    const PrecisionColumn c =
        solve_block(blk, n, hp.lambda, net.omega(idx, col), net.omega(col, col));
    write_column(net.omega, col, idx, c);
    return c;
}

PrecisionLoopReport update_precision(NetworkState& net, const ResidualScatter& scat, double n,
                                     const Hyperparameters& hp, const FitConfig& cfg,
                                     const DiagonalCoupling* coupling)
{
    check_shapes(net, scat);
    const Index p = net.p();
    PrecisionLoopReport report;
    std::vector<std::vector<Index>> index_sets;
    index_sets.reserve(static_cast<std::size_t>(p));
    for (Index col = 0; col < p; ++col) {
        index_sets.push_back(others(p, col));
    }

    while (report.cycles < cfg.max_inner_iters) {
        // Covariance kept in step with omega so Omega11^-1 costs O(p^2) per column.
        Eigen::LLT<Matrix> llt(net.omega);
        if (llt.info() != Eigen::Success) {
            throw Error(ErrorKind::SingularBlock, "precision matrix lost positive definiteness");
        }
        Matrix sigma = llt.solve(Matrix::Identity(p, p));

        double max_change = 0.0;
        for (Index col = 0; col < p; ++col) {
            const std::vector<Index>& idx = index_sets[static_cast<std::size_t>(col)];
            const Vector sigma12 = sigma(idx, col);
            const double sigma22 = sigma(col, col);
            Matrix W = sigma(idx, idx);
            if (p > 1) {
                W.noalias() -= sigma12 * sigma12.transpose() / sigma22;
            }

            const Vector old12 = net.omega(idx, col);
            const double old22 = net.omega(col, col);
            const ColumnBlock blk = make_block(W, net, scat, col, idx, coupling);
            const PrecisionColumn c = solve_block(blk, n, hp.lambda, old12, old22);

            if (p > 1) {
                max_change = std::max(max_change, (c.omega12 - old12).cwiseAbs().maxCoeff());
            }
            max_change = std::max(max_change, std::abs(c.omega22 - old22));
            write_column(net.omega, col, idx, c);

            const Vector beta = W * c.omega12;
            const double schur = c.omega22 - c.omega12.dot(beta);
            if (!(schur > 0)) {
                throw Error(ErrorKind::SingularBlock, "precision column update lost definiteness");
            }
            Matrix sigma11 = W;
            sigma11.noalias() += beta * beta.transpose() / schur;
            sigma(idx, idx) = sigma11;
            const Vector new12 = -beta / schur;
            for (std::size_t a = 0; a < idx.size(); ++a) {
                sigma(idx[a], col) = new12(static_cast<Index>(a));
                sigma(col, idx[a]) = new12(static_cast<Index>(a));
            }
            sigma(col, col) = 1.0 / schur;
        }
        ++report.cycles;
        if (max_change < cfg.inner_tol) {
            report.converged = true;
            break;
        }
    }
    return report;
}

double precision_objective(const Matrix& omega, const ResidualScatter& scat, double n,
                           const Matrix& d_star, const Hyperparameters& hp,
                           const DiagonalCoupling* coupling)
{
    const Index p = omega.rows();
    Eigen::LLT<Matrix> llt(omega);
    if (llt.info() != Eigen::Success) {
        return -std::numeric_limits<double>::infinity();
    }
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    double value = 0.5 * n * logdet - 0.5 * (scat.S.cwiseProduct(omega)).sum() -
                   0.5 * hp.lambda * omega.trace();
    for (Index i = 0; i < p; ++i) {
        for (Index j = i + 1; j < p; ++j) {
            value -= 0.5 * d_star(i, j) * omega(i, j) * omega(i, j);
        }
        if (coupling != nullptr) {
            value += coupling->log_weight(i) * std::log(omega(i, i)) -
                     0.5 * coupling->linear(i) * omega(i, i);
        }
    }
    return value;
}

Vector update_theta_gamma(const Matrix& phi, const Hyperparameters& hp)
{
    const double q = static_cast<double>(phi.rows());
    const double denom = q + hp.a_gamma + hp.b_gamma - 2.0;
    Vector theta(phi.cols());
    for (Index j = 0; j < phi.cols(); ++j) {
        double value = 0.5;
        if (denom > 0) {
            value = (phi.col(j).sum() + hp.a_gamma - 1.0) / denom;
        }
        theta(j) = std::clamp(value, 1e-6, 1.0 - 1e-6);
    }
    return theta;
}

double update_pi(const Matrix& p_star, const Hyperparameters& hp)
{
    const Index p = p_star.rows();
    // Sorted summation: the result depends only on the multiset of values,
    // so relabeling nodes cannot change pi.
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(p * (p - 1) / 2));
    for (Index i = 0; i < p; ++i) {
        for (Index j = i + 1; j < p; ++j) {
            values.push_back(p_star(i, j));
        }
    }
    std::sort(values.begin(), values.end());
    double expected_edges = 0.0;
    for (double v : values) {
        expected_edges += v;
    }
    const double pairs = 0.5 * static_cast<double>(p) * static_cast<double>(p - 1);
    const double denom = hp.a_pi + hp.b_pi + pairs - 2.0;
    if (!(denom > 0)) {
        return 0.5;
    }
    return std::clamp((hp.a_pi + expected_edges - 1.0) / denom, 1e-12, 1.0 - 1e-12);
}

Matrix tau_free_weights(const Matrix& p_star, const Hyperparameters& hp)
{
    const double inv_var0 = 1.0 / (hp.nu0 * hp.nu0);
    const double inv_var1 = 1.0 / (hp.nu1 * hp.nu1);
    Matrix w = ((1.0 - p_star.array()) * inv_var0 + p_star.array() * inv_var1).matrix();
    w.diagonal().setZero();
    return w;
}

TauUpdate update_tau(const Matrix& omega, const Matrix& weights, const Hyperparameters& hp,
                     double previous_tau)
{
    const Index p = omega.rows();
    double weighted = 0.0;
    for (Index i = 0; i < p; ++i) {
        for (Index j = i + 1; j < p; ++j) {
            weighted += omega(i, j) * omega(i, j) * weights(i, j);
        }
    }
    const double numer = hp.a_tau - 1.0 + 0.5 * static_cast<double>(p * (p - 1));
    const double denom = hp.b_tau - 2.0 + 0.5 * weighted;
    TauUpdate out;
    if (!(denom > 0) || !(numer > 0) || !std::isfinite(numer / denom)) {
        out.tau = previous_tau;
        out.fallback = true;
        return out;
    }
    out.tau = numer / denom;
    return out;
}

Matrix initial_precision(const Matrix& Z)
{
    const Index p = Z.cols();
    const double n = static_cast<double>(Z.rows());
    Matrix centered = Z.rowwise() - Z.colwise().mean();
    Matrix sigma = centered.transpose() * centered / n;
    double base = sigma.diagonal().mean();
    if (!(base > 0)) {
        base = 1.0;
    }
    const double max_diag = std::max(sigma.diagonal().maxCoeff(), base);
    for (int attempt = 0; attempt < 200; ++attempt) {
        Eigen::LLT<Matrix> llt(sigma);
        if (llt.info() == Eigen::Success) {
            const double min_pivot = llt.matrixLLT().diagonal().array().square().minCoeff();
            if (min_pivot > 1e-10 * max_diag) {
                return llt.solve(Matrix::Identity(p, p));
            }
        }
        sigma.diagonal().array() += 1e-3 * base;
    }
    throw Error(ErrorKind::SingularBlock, "could not regularize the initial covariance");
}

}  // namespace sinc
