#include "sinc/synthetic.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace sinc {

namespace {

using Rng = std::mt19937_64;

// Independent streams for each generation stage, derived from one seed.
Rng stream(std::uint64_t seed, std::uint64_t stage)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stage)};
    return Rng(seq);
}

void add_edge(BoolMatrix& adj, Index i, Index j)
{
    adj(i, j) = true;
    adj(j, i) = true;
}

// Start index of group g when p nodes are split into k near-equal groups.
Index group_start(Index p, Index k, Index g)
{
    return p * g / k;
}

// log of a Gamma(shape, 1) draw; boosts small shapes so the draw cannot underflow.
double log_gamma_draw(double shape, Rng& rng)
{
    if (shape >= 1.0) {
        std::gamma_distribution<double> g(shape, 1.0);
        return std::log(g(rng));
    }
    std::gamma_distribution<double> g(shape + 1.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng);
    while (u == 0.0) {
        u = unif(rng);
    }
    return std::log(g(rng)) + std::log(u) / shape;
}

}  // namespace

Vector sample_dirichlet(const Vector& alpha, std::mt19937_64& rng)
{
    const Index p = alpha.size();
    Vector log_g(p);
    for (Index j = 0; j < p; ++j) {
        log_g(j) = log_gamma_draw(alpha(j), rng);
    }
    Vector h = (log_g.array() - log_g.maxCoeff()).exp().matrix();
    return h / h.sum();
}

Vector sample_multinomial(const Vector& prob, long total, std::mt19937_64& rng)
{
    const Index p = prob.size();
    Vector counts = Vector::Zero(p);
    long remaining = total;
    double mass = 1.0;
    for (Index j = 0; j < p && remaining > 0; ++j) {
        if (j == p - 1) {
            counts(j) = static_cast<double>(remaining);
            break;
        }
        const double share = mass > 0 ? std::clamp(prob(j) / mass, 0.0, 1.0) : 1.0;
        std::binomial_distribution<long> bin(remaining, share);
        const long draw = bin(rng);
        counts(j) = static_cast<double>(draw);
        remaining -= draw;
        mass -= prob(j);
    }
    return counts;
}

const char* to_string(GraphKind kind)
{
    switch (kind) {
    case GraphKind::Band: return "band";
    case GraphKind::Cluster: return "cluster";
    case GraphKind::Hub: return "hub";
    case GraphKind::Random: return "random";
    }
    return "unknown";
}

GraphKind parse_graph_kind(const std::string& name)
{
    if (name == "band") return GraphKind::Band;
    if (name == "cluster") return GraphKind::Cluster;
    if (name == "hub") return GraphKind::Hub;
    if (name == "random") return GraphKind::Random;
    throw Error(ErrorKind::InvalidArgument,
                "unknown graph kind '" + name + "' (expected band, cluster, hub or random)");
}

void GraphSpec::validate() const
{
    if (p < 1 || bandwidth < 1 || n_hubs < 1 || n_clusters < 1) {
        throw Error(ErrorKind::InvalidArgument, "graph parameters must be positive");
    }
    if (!(edge_prob > 0 && edge_prob < 1) ||
        !(within_cluster_prob > 0 && within_cluster_prob < 1)) {
        throw Error(ErrorKind::InvalidArgument, "edge probabilities must lie in (0, 1)");
    }
    if ((kind == GraphKind::Hub && n_hubs > p) || (kind == GraphKind::Cluster && n_clusters > p)) {
        throw Error(ErrorKind::InvalidArgument, "more groups than nodes");
    }
}

BoolMatrix generate_graph(const GraphSpec& spec, std::uint64_t seed)
{
    spec.validate();
    const Index p = spec.p;
    BoolMatrix adj = BoolMatrix::Constant(p, p, false);
    Rng rng = stream(seed, 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    switch (spec.kind) {
    case GraphKind::Band:
        for (Index i = 0; i < p; ++i) {
            for (Index j = i + 1; j < p && j - i <= spec.bandwidth; ++j) {
                add_edge(adj, i, j);
            }
        }
        break;
    case GraphKind::Hub:
        for (Index g = 0; g < spec.n_hubs; ++g) {
            const Index hub = group_start(p, spec.n_hubs, g);
            for (Index i = hub + 1; i < group_start(p, spec.n_hubs, g + 1); ++i) {
                add_edge(adj, hub, i);
            }
        }
        break;
    case GraphKind::Cluster:
        for (Index g = 0; g < spec.n_clusters; ++g) {
            const Index begin = group_start(p, spec.n_clusters, g);
            const Index end = group_start(p, spec.n_clusters, g + 1);
            for (Index i = begin; i < end; ++i) {
                for (Index j = i + 1; j < end; ++j) {
                    if (unif(rng) < spec.within_cluster_prob) {
                        add_edge(adj, i, j);
                    }
                }
            }
        }
        break;
    case GraphKind::Random:
        for (Index i = 0; i < p; ++i) {
            for (Index j = i + 1; j < p; ++j) {
                if (unif(rng) < spec.edge_prob) {
                    add_edge(adj, i, j);
                }
            }
        }
        break;
    }
    return adj;
}

Matrix generate_precision(const BoolMatrix& adjacency, double v, double u, std::uint64_t seed,
                          bool random_sign)
{
    const Index p = adjacency.rows();
    if (adjacency.cols() != p) {
        throw Error(ErrorKind::DimensionMismatch, "adjacency must be square");
    }
    Rng rng = stream(seed, 2);
    std::bernoulli_distribution coin(0.5);
    Matrix omega = Matrix::Zero(p, p);
    for (Index i = 0; i < p; ++i) {
        for (Index j = i + 1; j < p; ++j) {
            if (adjacency(i, j) != adjacency(j, i)) {
                throw Error(ErrorKind::InvalidArgument, "adjacency must be symmetric");
            }
            if (adjacency(i, j)) {
                const double value = random_sign && coin(rng) ? -v : v;
                omega(i, j) = value;
                omega(j, i) = value;
            }
        }
    }
    double lambda_min = 0.0;
    if (p > 0) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(omega, Eigen::EigenvaluesOnly);
        lambda_min = es.eigenvalues()(0);
    }
    omega.diagonal().setConstant(std::abs(lambda_min) + 0.1 + u);
    return omega;
}

GroundTruth generate_dataset(const GraphSpec& spec, Index n, Index q, std::uint64_t seed,
                             const PrecisionOptions& precision)
{
    if (n < 2 || q < 0) {
        throw Error(ErrorKind::InvalidArgument, "need n >= 2 and q >= 0");
    }
    const Index p = spec.p;
    GroundTruth truth;
    truth.adjacency = generate_graph(spec, seed);
    truth.omega_true =
        generate_precision(truth.adjacency, precision.v, precision.u, seed, precision.random_sign);

    Rng rng = stream(seed, 3);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Matrix raw(n, q);
    for (Index k = 0; k < q; ++k) {
        for (Index i = 0; i < n; ++i) {
            raw(i, k) = normal(rng);
        }
    }
    truth.covariates = CovariateMatrix(raw);
    const Matrix& M = truth.covariates.scaled();

    truth.B_true = Matrix::Zero(q, p);
    for (Index j = 0; j < p; ++j) {
        for (Index k = 0; k < q; ++k) {
            const double r = unif(rng);
            const double magnitude = 0.5 + 0.5 * unif(rng);
            if (r < 0.1) {
                truth.B_true(k, j) = -magnitude;
            } else if (r < 0.2) {
                truth.B_true(k, j) = magnitude;
            }
        }
    }
    truth.B0_true.resize(p);
    for (Index j = 0; j < p; ++j) {
        const bool high = unif(rng) < 0.2;
        truth.B0_true(j) = (high ? 6.0 : 2.0) + 2.0 * unif(rng);
    }

    // Z_i = mean_i + L^-T e_i with Omega = L L', so Cov(Z_i) = Omega^-1.
    Eigen::LLT<Matrix> llt(truth.omega_true);
    Matrix noise(p, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) {
            noise(j, i) = normal(rng);
        }
    }
    const Matrix correlated = llt.matrixU().solve(noise);
    truth.Z_true = correlated.transpose();
    truth.Z_true.rowwise() += truth.B0_true.transpose();
    if (q > 0) {
        truth.Z_true.noalias() += M * truth.B_true;
    }

    std::normal_distribution<double> depth(3000.0, 250.0);
    truth.h.resize(n, p);
    Matrix counts(n, p);
    for (Index i = 0; i < n; ++i) {
        truth.h.row(i) = sample_dirichlet(truth.Z_true.row(i).array().exp().matrix().transpose(), rng);
        const double total = std::max(0.0, std::nearbyint(depth(rng)));
        counts.row(i) = sample_multinomial(truth.h.row(i).transpose(), static_cast<long>(total), rng);
    }

    std::vector<std::string> taxa;
    for (Index j = 0; j < p; ++j) {
        taxa.push_back("taxon_" + std::to_string(j + 1));
    }
    truth.counts = CountMatrix(counts, taxa);
    return truth;
}

}  // namespace sinc
