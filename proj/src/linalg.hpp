#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace nlfb::detail {

/// Square system with kl sub- and ku super-diagonals. Narrow bands go to a
/// sparse LU, wide ones to a dense partial-pivoting LU.
class LinearSystem {
public:
    LinearSystem(std::size_t n, std::size_t kl, std::size_t ku);

    bool banded() const { return banded_; }
    std::size_t size() const { return n_; }
    void clear();
    /// Entries outside the band are ignored.
    void add(std::size_t i, std::size_t j, double v);
    /// Solves in place. Returns false when singular.
    bool solve(std::vector<double>& rhs);

private:
    std::size_t n_, kl_, ku_;
    bool banded_;
    std::vector<Eigen::Triplet<double>> trip_;
    Eigen::MatrixXd dense_;
};

} // namespace nlfb::detail
