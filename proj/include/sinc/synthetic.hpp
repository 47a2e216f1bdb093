#pragma once

#include "sinc/types.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace sinc {

enum class GraphKind { Band, Cluster, Hub, Random };

const char* to_string(GraphKind kind);
/// "band", "cluster", "hub" or "random"; throws InvalidArgument otherwise.
GraphKind parse_graph_kind(const std::string& name);

struct GraphSpec {
    GraphKind kind = GraphKind::Random;
    Index p = 100;
    Index bandwidth = 3;
    Index n_hubs = 3;
    double edge_prob = 0.025;
    double within_cluster_prob = 0.30;
    Index n_clusters = 3;

    void validate() const;
};

/// Symmetric adjacency with a false diagonal.
BoolMatrix generate_graph(const GraphSpec& spec, std::uint64_t seed);

/// v on every edge (a random sign per edge when random_sign is set), 0
/// elsewhere; the diagonal is |lambda_min(off-diagonal part)| + 0.1 + u.
Matrix generate_precision(const BoolMatrix& adjacency, double v, double u, std::uint64_t seed,
                          bool random_sign = false);

struct PrecisionOptions {
    double v = 1.0;
    double u = 1e-4;
    bool random_sign = false;
};

struct GroundTruth {
    BoolMatrix adjacency;
    Matrix omega_true;
    Matrix B_true;   // q x p, on the scaled covariates
    Vector B0_true;  // p
    Matrix Z_true;   // n x p
    Matrix h;        // n x p relative abundances
    CountMatrix counts;
    CovariateMatrix covariates;
};

/// One Dirichlet(alpha) draw from normalized Gamma variates (log scale, so
/// tiny shapes do not underflow).
Vector sample_dirichlet(const Vector& alpha, std::mt19937_64& rng);

/// Counts summing to total via sequential binomial draws.
Vector sample_multinomial(const Vector& prob, long total, std::mt19937_64& rng);

GroundTruth generate_dataset(const GraphSpec& spec, Index n, Index q, std::uint64_t seed,
                             const PrecisionOptions& precision = {});

}  // namespace sinc
