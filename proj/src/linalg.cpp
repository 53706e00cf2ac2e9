#include "drfuse/linalg.hpp"

#include "drfuse/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace drfuse {
namespace {

// Flips each column so that its first component of significant magnitude is positive.
void normalize_signs(Matrix& vectors) {
    for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
        auto col = vectors.col(j);
        const double scale = col.cwiseAbs().maxCoeff();
        if (scale == 0.0) continue;
        for (Eigen::Index i = 0; i < col.size(); ++i) {
            if (std::abs(col(i)) > 1e-10 * scale) {
                if (col(i) < 0.0) col = -col;
                break;
            }
        }
    }
}

// Descending reorder of an ascending solver result, stable on ties.
EigenPairs descending(const Vector& ascending_values, const Matrix& ascending_vectors) {
    const Eigen::Index n = ascending_values.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return ascending_values(a) > ascending_values(b);
    });
    EigenPairs out;
    out.values.resize(n);
    out.vectors.resize(ascending_vectors.rows(), n);
    for (Eigen::Index k = 0; k < n; ++k) {
        out.values(k) = ascending_values(order[static_cast<std::size_t>(k)]);
        out.vectors.col(k) = ascending_vectors.col(order[static_cast<std::size_t>(k)]);
    }
    return out;
}

EigenPairs eig_unsigned(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrize(a));
    if (solver.info() != Eigen::Success) throw InputError("eigendecomposition did not converge");
    return descending(solver.eigenvalues(), solver.eigenvectors());
}

void require_square(const Matrix& a, const char* what) {
    if (a.rows() != a.cols() || a.rows() == 0)
        throw DimensionError(std::string(what) + " must be a non-empty square matrix");
}

}  // namespace

Matrix EigenPairs::top_rows(Eigen::Index m) const {
    return vectors.leftCols(m).transpose();
}

Matrix EigenPairs::bottom_rows(Eigen::Index m) const {
    return vectors.rightCols(m).transpose();
}

void require_finite(const Matrix& a, const char* what) {
    if (!a.allFinite()) throw InputError(std::string(what) + " has non-finite entries");
}

void require_symmetric(const Matrix& a, const char* what) {
    require_square(a, what);
    require_finite(a, what);
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw InputError(std::string(what) + " is not symmetric");
}

EigenPairs eig_sym(const Matrix& a) {
    require_symmetric(a, "eig_sym input");
    EigenPairs pairs = eig_unsigned(a);
    normalize_signs(pairs.vectors);
    return pairs;
}

Eigen::Index numerical_rank(const Matrix& a) {
    const Vector values = eig_unsigned(a).values;
    const double top = values.cwiseAbs().maxCoeff();
    if (top == 0.0) return 0;
    return (values.array() > kRankTolerance * top).count();
}

bool is_pd(const Matrix& a) {
    if (a.rows() != a.cols() || a.rows() == 0 || !a.allFinite()) return false;
    Eigen::LLT<Matrix> llt(symmetrize(a));
    if (llt.info() != Eigen::Success) return false;
    const Vector values = eig_unsigned(a).values;
    return values(values.size() - 1) > kRankTolerance * values(0);
}

EigenPairs solve_gevp(const Matrix& q, const Matrix& s) {
    require_symmetric(q, "GEVP matrix Q");
    require_symmetric(s, "GEVP matrix S");
    if (q.rows() != s.rows()) throw DimensionError("GEVP operands differ in size");
    if (!is_pd(s)) throw DefinitenessError("GEVP matrix S is not positive definite");

    const Eigen::LLT<Matrix> llt(symmetrize(s));
    const auto lower = llt.matrixL();
    const Matrix left = lower.solve(q);                                // L⁻¹Q
    const Matrix whitened = lower.solve(left.transpose()).transpose();  // L⁻¹QL⁻ᵀ
    EigenPairs pairs = eig_unsigned(whitened);
    pairs.vectors = llt.matrixU().solve(pairs.vectors);  // u = L⁻ᵀw
    normalize_signs(pairs.vectors);
    return pairs;
}

EigenPairs solve_gevp_singular(const Matrix& q, const Matrix& s, Eigen::Index rank) {
    require_symmetric(q, "GEVP matrix Q");
    require_symmetric(s, "GEVP matrix S");
    if (q.rows() != s.rows()) throw DimensionError("GEVP operands differ in size");
    if (rank <= 0) throw DegenerateError("GEVP matrix S has rank zero");
    if (rank > s.rows()) throw RankError("requested rank exceeds the size of S");

    const EigenPairs s_pairs = eig_unsigned(s);
    const Vector kept = s_pairs.values.head(rank);
    if (kept(rank - 1) <= 0.0) throw DefinitenessError("S has fewer positive eigenvalues than the requested rank");

    // B = D₁^{-1/2} V₁ᵀ maps the range space of S onto ℝʳ with B S Bᵀ = I.
    const Matrix basis = kept.cwiseSqrt().cwiseInverse().asDiagonal() * s_pairs.vectors.leftCols(rank).transpose();
    const Matrix reduced = symmetrize(basis * q * basis.transpose());
    EigenPairs pairs = eig_unsigned(reduced);
    pairs.vectors = basis.transpose() * pairs.vectors;
    normalize_signs(pairs.vectors);
    return pairs;
}

Matrix orthonormalize_rows(const Matrix& phi) {
    require_finite(phi, "map");
    const Eigen::Index m = phi.rows();
    const Eigen::Index n = phi.cols();
    if (m == 0 || n == 0) throw DimensionError("map must be non-empty");
    if (m > n) throw RankError("map has more rows than columns");

    const Eigen::HouseholderQR<Matrix> qr(phi.transpose());
    const Vector diag = qr.matrixQR().diagonal().head(m);
    const double top = diag.cwiseAbs().maxCoeff();
    if (top == 0.0 || diag.cwiseAbs().minCoeff() <= kRankTolerance * top)
        throw RankError("map is not of full row rank");

    Matrix basis = qr.householderQ() * Matrix::Identity(n, m);
    // Positive R diagonal reproduces classical Gram-Schmidt signs.
    for (Eigen::Index i = 0; i < m; ++i)
        if (diag(i) < 0.0) basis.col(i) = -basis.col(i);
    return basis.transpose();
}

bool is_psd(const Matrix& a, double tol) {
    require_symmetric(a, "is_psd input");
    const Vector values = eig_unsigned(a).values;
    return values(values.size() - 1) >= -tol;
}

Matrix pinv_sym(const Matrix& a, double rel_tol) {
    const EigenPairs pairs = eig_unsigned(a);
    const double top = pairs.values.cwiseAbs().maxCoeff();
    Vector inv = Vector::Zero(pairs.size());
    for (Eigen::Index i = 0; i < pairs.size(); ++i)
        if (std::abs(pairs.values(i)) > rel_tol * top) inv(i) = 1.0 / pairs.values(i);
    return symmetrize(pairs.vectors * inv.asDiagonal() * pairs.vectors.transpose());
}

Matrix inverse_pd(const Matrix& a, const char* what) {
    require_square(a, what);
    const Eigen::LLT<Matrix> llt(symmetrize(a));
    if (llt.info() != Eigen::Success) throw DefinitenessError(std::string(what) + " is not positive definite");
    return symmetrize(llt.solve(Matrix::Identity(a.rows(), a.cols())));
}

Matrix sqrtm_pd(const Matrix& a) {
    const EigenPairs pairs = eig_unsigned(a);
    if (pairs.values(pairs.size() - 1) <= 0.0) throw DefinitenessError("square root of a non-PD matrix");
    return symmetrize(pairs.vectors * pairs.values.cwiseSqrt().asDiagonal() * pairs.vectors.transpose());
}

Matrix inv_sqrtm_pd(const Matrix& a) {
    const EigenPairs pairs = eig_unsigned(a);
    if (pairs.values(pairs.size() - 1) <= 0.0) throw DefinitenessError("inverse square root of a non-PD matrix");
    return symmetrize(pairs.vectors * pairs.values.cwiseSqrt().cwiseInverse().asDiagonal() *
                      pairs.vectors.transpose());
}

double orthonormality_residual(const Matrix& m) {
    return (m * m.transpose() - Matrix::Identity(m.rows(), m.rows())).cwiseAbs().maxCoeff();
}

double max_off_diagonal(const Matrix& a) {
    Matrix off = a;
    off.diagonal().setZero();
    return off.size() == 0 ? 0.0 : off.cwiseAbs().maxCoeff();
}

}  // namespace drfuse
