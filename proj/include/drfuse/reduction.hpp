#pragma once

#include "drfuse/fusion.hpp"
#include "drfuse/linalg.hpp"

#include <vector>

namespace drfuse {

struct GevoInputs {
    Matrix r1;
    Matrix r2;
    /// cov(v₁, v₂), n_x × n₂. Zero for independent estimates.
    Matrix r12;
    Matrix h2;
    Eigen::Index m = 1;
};

/// Q = ΔᵀΔ and S = H R₁ Hᵀ + R₂ − H R₁₂ − R₁₂ᵀ Hᵀ with Δ = R₁Hᵀ − R₁₂.
struct GevoProblem {
    Matrix q;
    Matrix s;
};
GevoProblem gevo_problem(const GevoInputs& in);

struct GevoResult {
    Matrix map;
    /// Generalized pairs of (Q, S); restricted to range(S) when S is singular.
    EigenPairs pairs;
};

Matrix gevo(const GevoInputs& in);
GevoResult gevo_detailed(const GevoInputs& in);

Matrix gevo_kf(const Matrix& r1, const Matrix& r2, const Matrix& h2, Eigen::Index m);

struct GevoCiConfig {
    double omega0 = 0.5;
    double epsilon = 1e-4;
    int max_iters = 100;
};

struct ConvergenceTrace {
    /// J₁, J₂, … for the iterations performed.
    std::vector<double> j_values;
    std::vector<double> omegas;
    int iterations = 0;
    bool truncated = false;
};

struct GevoCiResult {
    Matrix map;
    CiWeight omega{1.0};
    ConvergenceTrace trace;
};

GevoCiResult gevo_ci(const Matrix& r1, const Matrix& r2, const Matrix& h2, Eigen::Index m,
                     const GevoCiConfig& cfg = {});

/// Cross-covariance implied by the largest-ellipsoid rule.
struct ImplicitCrossCov {
    Matrix common_info;  // 𝓘_γ
    Vector d;            // diagonal of D in the jointly whitened domain
    Matrix r12;
};
ImplicitCrossCov le_implicit_cross_covariance(const Matrix& r1, const Matrix& r2, const Matrix& h2);

/// Optimal map for LE fusion. Requires rank(H₂) = n_x.
Matrix gevo_le(const Matrix& r1, const Matrix& r2, const Matrix& h2, Eigen::Index m);

/// Eigenvectors of the m smallest eigenvalues of R₂, in descending-eigenvalue order.
Matrix pco(const Matrix& r2, Eigen::Index m);

struct DiagonalApproximation {
    double scale;
    Matrix cov;  // s · diag(R₂)
};
DiagonalApproximation dca_eig(const Matrix& r2);

/// Orthonormalizes the rows of Φ and rotates them so that M R₂ Mᵀ is diagonal.
Matrix finalize_map(const Matrix& phi, const Matrix& r2);

struct LossLadder {
    /// ℓ₀ … ℓ_r.
    Vector ell;
    /// λ₁ ≥ … ≥ λ_r.
    Vector lambdas;
};
/// `in.m` is ignored.
LossLadder loss_ladder(const GevoInputs& in);

struct RankSelection {
    Eigen::Index m = 0;
    bool degenerate = false;
};
RankSelection select_m(const LossLadder& ladder, double tau);

}  // namespace drfuse
