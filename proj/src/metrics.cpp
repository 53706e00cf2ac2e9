#include "drfuse/metrics.hpp"

#include "drfuse/errors.hpp"

#include <cmath>

namespace drfuse {
namespace {

Eigen::LLT<Matrix> factor(const Matrix& p, const Matrix& p_true) {
    require_symmetric(p, "covariance");
    require_symmetric(p_true, "reference covariance");
    if (p.rows() != p_true.rows()) throw DimensionError("covariances differ in size");
    Eigen::LLT<Matrix> llt(symmetrize(p));
    if (llt.info() != Eigen::Success) throw DefinitenessError("covariance is not positive definite");
    return llt;
}

}  // namespace

double coin(const Matrix& p, const Matrix& p_true) {
    const Eigen::LLT<Matrix> llt = factor(p, p_true);
    const auto lower = llt.matrixL();
    const Matrix left = lower.solve(p_true);
    const Matrix whitened = symmetrize(lower.solve(left.transpose()).transpose());
    return Eigen::SelfAdjointEigenSolver<Matrix>(whitened, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

double anees(const Matrix& p, const Matrix& p_true) {
    const Eigen::LLT<Matrix> llt = factor(p, p_true);
    return llt.solve(p_true).trace() / static_cast<double>(p.rows());
}

double rmtr(const Matrix& p, const Matrix& p_ref) {
    if (p.rows() != p_ref.rows()) throw DimensionError("covariances differ in size");
    return std::sqrt(p.trace() / p_ref.trace());
}

Matrix mc_error_cov(const std::vector<Vector>& errors) {
    if (errors.empty()) throw InputError("no error samples");
    ErrorMoments acc(errors.front().size());
    for (const Vector& e : errors) acc.add(e);
    return acc.second_moment();
}

ErrorMoments::ErrorMoments(Eigen::Index dim) : sum_outer_(Matrix::Zero(dim, dim)), sum_(Vector::Zero(dim)) {}

void ErrorMoments::add(const Vector& error) {
    if (error.size() != sum_.size()) throw DimensionError("error sample has the wrong length");
    sum_outer_.selfadjointView<Eigen::Lower>().rankUpdate(error);
    sum_ += error;
    ++count_;
}

void ErrorMoments::merge(const ErrorMoments& other) {
    if (other.sum_.size() != sum_.size()) throw DimensionError("accumulators differ in size");
    sum_outer_ += other.sum_outer_;
    sum_ += other.sum_;
    count_ += other.count_;
}

Matrix ErrorMoments::second_moment() const {
    if (count_ == 0) throw InputError("no error samples");
    Matrix out = sum_outer_.selfadjointView<Eigen::Lower>();
    return out / static_cast<double>(count_);
}

Vector ErrorMoments::mean() const {
    if (count_ == 0) throw InputError("no error samples");
    return sum_ / static_cast<double>(count_);
}

}  // namespace drfuse
