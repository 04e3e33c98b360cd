#pragma once

#include "cosm/core.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace cosm {

class CorrespondenceOutOfRange : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Gaussian correntropy kernel exp(-d² / 2σ²), without the density normalisation.
inline double gaussian_kernel(double dist_sq, double sigma) {
    return std::exp(-dist_sq / (2.0 * sigma * sigma));
}

struct Triplet {
    std::size_t row = 0;
    std::size_t col = 0;
    double weight = 0.0;

    friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// Sparse N_s x N_t correntropy weights, rebuilt from zero every iteration.
///
/// Triplets are sorted by (row, col) and unique. `matched` is the
/// correspondence vector the matrix was built from; mirrored cells alone do not
/// say which target each source point was matched to.
struct SimilarityMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<Triplet> entries;
    std::vector<std::size_t> matched;

    std::size_t nnz() const { return entries.size(); }
    /// Dense copy, for diagnostics and tests only.
    Eigen::MatrixXd to_dense() const;
};

struct SimilarityOptions {
    /// Also write SM(c(i), i). Only applies when rows == cols.
    bool mirror = true;
};

/// Writes SM(i, c(i)) = G(|p_i - q_c(i)|²) for ascending i, and the mirrored
/// cell SM(c(i), i) right after it when the clouds have equal size. A later
/// write to a cell replaces the earlier value. Cells whose final weight
/// underflowed to zero are left out.
SimilarityMatrix build_similarity(std::span<const Point3> source, std::span<const Point3> target,
                                  std::span<const std::size_t> corr, double sigma,
                                  SimilarityOptions options = {});

/// Weight 1 at every (i, c(i)) and nothing else: the plain SVD-ICP pairing.
SimilarityMatrix uniform_similarity(std::size_t target_size, std::span<const std::size_t> corr);

struct RankProxy {
    std::size_t distinct_targets = 0;
    /// Numeric rank (singular values above 1e-10 x largest); only for matrices up to 2000 x 2000.
    std::optional<std::size_t> exact_rank;
};

inline constexpr std::size_t kExactRankLimit = 2000;

std::size_t distinct_count(std::span<const std::size_t> indices);
RankProxy rank_proxy(const SimilarityMatrix& sm);

}  // namespace cosm
