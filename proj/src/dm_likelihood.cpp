#include "sinc/dm_likelihood.hpp"

#include "sinc/lbfgs.hpp"
#include "sinc/parallel.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>

namespace sinc {

namespace {

namespace policies = boost::math::policies;
// Poles and overflow come back as non-finite values; the callers turn those into Error.
using FastPolicy = policies::policy<policies::promote_double<false>,
                                    policies::domain_error<policies::ignore_error>,
                                    policies::pole_error<policies::ignore_error>,
                                    policies::overflow_error<policies::ignore_error>,
                                    policies::evaluation_error<policies::ignore_error>>;

double log_gamma(double x)
{
    return boost::math::lgamma(x, FastPolicy());
}

double digamma(double x)
{
    return boost::math::digamma(x, FastPolicy());
}

void check_row(const Vector& x_row, const Vector& z_row)
{
    if (x_row.size() != z_row.size()) {
        throw Error(ErrorKind::DimensionMismatch, "count row and latent row differ in length");
    }
    if (!z_row.allFinite()) {
        throw Error(ErrorKind::NonFiniteResult, "latent row has non-finite entries");
    }
}

// exp(min(z, clamp)); the derivative is zero in the clamped region.
double clamped_alpha(double z)
{
    return std::exp(std::min(z, kLatentClamp));
}

double kernel_and_alpha(const Vector& x_row, const Vector& z_row, Vector& alpha)
{
    const Index p = x_row.size();
    alpha.resize(p);
    double sum_alpha = 0.0;
    double sum_x = 0.0;
    double value = 0.0;
    for (Index j = 0; j < p; ++j) {
        alpha(j) = clamped_alpha(z_row(j));
        sum_alpha += alpha(j);
        sum_x += x_row(j);
        if (x_row(j) != 0.0) {
            value += log_gamma(alpha(j) + x_row(j)) - log_gamma(alpha(j));
        }
    }
    if (sum_x != 0.0) {
        value += log_gamma(sum_alpha) - log_gamma(sum_alpha + sum_x);
    }
    if (!std::isfinite(value)) {
        throw Error(ErrorKind::NonFiniteResult, "Dirichlet-multinomial kernel overflowed");
    }
    return value;
}

double quadratic_and_gradient(const RowObjectiveContext& ctx, const Vector& z_row, Vector* grad)
{
    const Vector centered = z_row - ctx.mean_row;
    Vector omega_centered = (*ctx.omega) * centered;
    if (grad != nullptr) {
        *grad = omega_centered;
    }
    return 0.5 * centered.dot(omega_centered);
}

void check_context(const RowObjectiveContext& ctx, const Vector& z_row)
{
    check_row(ctx.x_row, z_row);
    const Index p = z_row.size();
    if (ctx.omega == nullptr || ctx.mean_row.size() != p || ctx.omega->rows() != p ||
        ctx.omega->cols() != p) {
        throw Error(ErrorKind::DimensionMismatch, "row objective context does not match p");
    }
}

}  // namespace

double dm_kernel_loglik(const Vector& x_row, const Vector& z_row)
{
    check_row(x_row, z_row);
    Vector alpha;
    return kernel_and_alpha(x_row, z_row, alpha);
}

double z_objective_row(const RowObjectiveContext& ctx, const Vector& z_row)
{
    check_context(ctx, z_row);
    Vector alpha;
    return -kernel_and_alpha(ctx.x_row, z_row, alpha) + quadratic_and_gradient(ctx, z_row, nullptr);
}

double z_objective_and_gradient(const RowObjectiveContext& ctx, const Vector& z_row, Vector& grad)
{
    check_context(ctx, z_row);
    Vector alpha;
    const double kernel = kernel_and_alpha(ctx.x_row, z_row, alpha);
    const double quad = quadratic_and_gradient(ctx, z_row, &grad);

    const Index p = z_row.size();
    const double sum_alpha = alpha.sum();
    const double sum_x = ctx.x_row.sum();
    const double total_term = sum_x != 0.0 ? digamma(sum_alpha) - digamma(sum_alpha + sum_x) : 0.0;
    for (Index j = 0; j < p; ++j) {
        if (z_row(j) > kLatentClamp) {
            continue;
        }
        double inner = total_term;
        if (ctx.x_row(j) != 0.0) {
            inner += digamma(alpha(j) + ctx.x_row(j)) - digamma(alpha(j));
        }
        grad(j) -= alpha(j) * inner;
    }
    if (!grad.allFinite()) {
        throw Error(ErrorKind::NonFiniteResult, "latent gradient overflowed");
    }
    return -kernel + quad;
}

Vector z_gradient_row(const RowObjectiveContext& ctx, const Vector& z_row)
{
    Vector grad;
    z_objective_and_gradient(ctx, z_row, grad);
    return grad;
}

LatentState optimize_latent(const CountMatrix& X, const Matrix& means, const Matrix& omega,
                            const LatentState& Z_init, const FitConfig& cfg,
                            LatentStepReport* report)
{
    const Index n = X.rows();
    const Index p = X.cols();
    if (means.rows() != n || means.cols() != p || Z_init.Z.rows() != n || Z_init.Z.cols() != p ||
        omega.rows() != p || omega.cols() != p) {
        throw Error(ErrorKind::DimensionMismatch, "optimize_latent: inconsistent shapes");
    }

    LatentState out = Z_init;
    std::vector<char> failed(static_cast<std::size_t>(n), 0);
    std::vector<char> clamped(static_cast<std::size_t>(n), 0);

    parallel_for(n, cfg.thread_count, [&](long i) {
        RowObjectiveContext ctx{X.values().row(i).transpose(), means.row(i).transpose(), &omega};
        Vector z = Z_init.Z.row(i).transpose();
        auto fg = [&ctx](const Vector& zz, Vector& g) {
            try {
                return z_objective_and_gradient(ctx, zz, g);
            } catch (const Error&) {
                // Trial points far outside the data range; the line search backtracks.
                g.setConstant(zz.size(), std::numeric_limits<double>::quiet_NaN());
                return std::numeric_limits<double>::infinity();
            }
        };
        const LbfgsReport r = minimize_lbfgs(fg, z, cfg.lbfgs);
        out.Z.row(i) = z.transpose();
        failed[static_cast<std::size_t>(i)] = r.line_search_failed ? 1 : 0;
        clamped[static_cast<std::size_t>(i)] = (z.array() >= kLatentClamp).any() ? 1 : 0;
    });

    if (report != nullptr) {
        for (Index i = 0; i < n; ++i) {
            report->line_search_failures += failed[static_cast<std::size_t>(i)];
            report->clamped_rows += clamped[static_cast<std::size_t>(i)];
        }
    }
    return out;
}

}  // namespace sinc
