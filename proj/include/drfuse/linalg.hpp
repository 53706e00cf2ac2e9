#pragma once

#include <Eigen/Dense>

#include <vector>

namespace drfuse {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Eigenvalues below this fraction of the largest one count as zero.
inline constexpr double kRankTolerance = 1e-10;

/// Eigen (or generalized eigen) pairs sorted by descending eigenvalue.
///
/// Column i of `vectors` belongs to `values[i]`. For generalized pairs the
/// vectors are S-orthonormal rather than orthonormal.
struct EigenPairs {
    Vector values;
    Matrix vectors;

    Eigen::Index size() const { return values.size(); }
    /// First `m` eigenvectors stacked as rows.
    Matrix top_rows(Eigen::Index m) const;
    /// Last `m` eigenvectors stacked as rows.
    Matrix bottom_rows(Eigen::Index m) const;
};

/// Throws InputError for non-finite entries or asymmetry beyond 1e-12 relative.
void require_symmetric(const Matrix& a, const char* what);
void require_finite(const Matrix& a, const char* what);

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/// Symmetric eigendecomposition, values descending.
///
/// Ties keep the solver's (ascending-index) order. Each eigenvector is signed
/// so that its first nonzero component is positive.
EigenPairs eig_sym(const Matrix& a);

/// Solves Q u = λ S u for symmetric Q and positive definite S by Cholesky
/// whitening. Throws DefinitenessError when S is not numerically PD.
EigenPairs solve_gevp(const Matrix& q, const Matrix& s);

/// Generalized eigenproblem restricted to the range space of a PSD S of
/// rank r. Returns r pairs with uᵢᵀ S uⱼ = δᵢⱼ.
EigenPairs solve_gevp_singular(const Matrix& q, const Matrix& s, Eigen::Index rank);

/// Number of eigenvalues of the symmetric matrix above kRankTolerance·λmax.
Eigen::Index numerical_rank(const Matrix& a);

/// Gram-Schmidt on the rows of `phi`: returns Ω with ΩΩᵀ = I and the same
/// row span. Throws RankError if `phi` is not of full row rank.
Matrix orthonormalize_rows(const Matrix& phi);

/// True iff λmin(a) >= -tol.
bool is_psd(const Matrix& a, double tol);

/// True iff `a` admits a Cholesky factorization and λmin > kRankTolerance·λmax.
bool is_pd(const Matrix& a);

/// Eigenvalue-thresholded pseudoinverse of a symmetric matrix.
Matrix pinv_sym(const Matrix& a, double rel_tol = kRankTolerance);

/// Inverse of a symmetric positive definite matrix via Cholesky.
Matrix inverse_pd(const Matrix& a, const char* what);

/// Symmetric square root and inverse square root of a PD matrix.
Matrix sqrtm_pd(const Matrix& a);
Matrix inv_sqrtm_pd(const Matrix& a);

/// Row-wise orthonormality residual ‖MMᵀ − I‖max.
double orthonormality_residual(const Matrix& m);

/// Largest off-diagonal magnitude.
double max_off_diagonal(const Matrix& a);

}  // namespace drfuse
