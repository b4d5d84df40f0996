#include "linalg.hpp"

#include <algorithm>

namespace nlfb::detail {

LinearSystem::LinearSystem(std::size_t n, std::size_t kl, std::size_t ku)
    : n_(n)
    , kl_(std::min(kl, n ? n - 1 : 0))
    , ku_(std::min(ku, n ? n - 1 : 0))
{
    banded_ = 3 * (kl_ + ku_) < n_;
    if (!banded_)
        dense_ = Eigen::MatrixXd::Zero(n_, n_);
}

void LinearSystem::clear()
{
    trip_.clear();
    if (!banded_)
        dense_.setZero();
}

void LinearSystem::add(std::size_t i, std::size_t j, double v)
{
    if (j > i + ku_ || i > j + kl_)
        return;
    if (banded_)
        trip_.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
    else
        dense_(i, j) += v;
}

bool LinearSystem::solve(std::vector<double>& rhs)
{
    Eigen::Map<Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(n_));
    if (banded_) {
        Eigen::SparseMatrix<double> a(n_, n_);
        a.setFromTriplets(trip_.begin(), trip_.end());
        // natural ordering keeps the fill inside the band
        Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::NaturalOrdering<int>> lu;
        lu.compute(a);
        if (lu.info() != Eigen::Success)
            return false;
        Eigen::VectorXd x = lu.solve(b);
        if (lu.info() != Eigen::Success || !x.allFinite())
            return false;
        b = x;
        return true;
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(dense_);
    Eigen::VectorXd x = lu.solve(b);
    if (!x.allFinite())
        return false;
    b = x;
    return true;
}

} // namespace nlfb::detail
