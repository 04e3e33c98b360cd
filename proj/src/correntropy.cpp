#include "cosm/correntropy.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <string>

namespace cosm {

namespace {

struct Write {
    std::size_t row;
    std::size_t col;
    std::size_t seq;
    double weight;
};

// Sort by cell then write order and keep the last write of each cell.
std::vector<Triplet> last_write_wins(std::vector<Write>& writes) {
    std::sort(writes.begin(), writes.end(), [](const Write& a, const Write& b) {
        if (a.row != b.row) return a.row < b.row;
        if (a.col != b.col) return a.col < b.col;
        return a.seq < b.seq;
    });
    std::vector<Triplet> out;
    out.reserve(writes.size());
    for (std::size_t i = 0; i < writes.size(); ++i) {
        const bool last = i + 1 == writes.size() || writes[i + 1].row != writes[i].row ||
                          writes[i + 1].col != writes[i].col;
        if (last && writes[i].weight > 0.0) out.push_back({writes[i].row, writes[i].col, writes[i].weight});
    }
    return out;
}

void check_corr(std::span<const std::size_t> corr, std::size_t rows, std::size_t cols) {
    if (corr.size() != rows) {
        throw CorrespondenceOutOfRange("correspondence vector has " + std::to_string(corr.size()) +
                                       " entries for " + std::to_string(rows) + " source points");
    }
    for (std::size_t i = 0; i < corr.size(); ++i) {
        if (corr[i] >= cols) {
            throw CorrespondenceOutOfRange("c(" + std::to_string(i) + ") = " + std::to_string(corr[i]) +
                                           " is outside a target of " + std::to_string(cols) + " points");
        }
    }
}

}  // namespace

Eigen::MatrixXd SimilarityMatrix::to_dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (const auto& t : entries) m(static_cast<Eigen::Index>(t.row), static_cast<Eigen::Index>(t.col)) = t.weight;
    return m;
}

SimilarityMatrix build_similarity(std::span<const Point3> source, std::span<const Point3> target,
                                  std::span<const std::size_t> corr, double sigma, SimilarityOptions options) {
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    check_corr(corr, source.size(), target.size());

    const bool mirror = options.mirror && source.size() == target.size();
    std::vector<Write> writes;
    writes.reserve(mirror ? 2 * corr.size() : corr.size());
    std::size_t seq = 0;
    for (std::size_t i = 0; i < corr.size(); ++i) {
        const std::size_t k = corr[i];
        const double w = gaussian_kernel((source[i] - target[k]).squaredNorm(), sigma);
        writes.push_back({i, k, seq++, w});
        if (mirror) writes.push_back({k, i, seq++, w});
    }

    SimilarityMatrix sm;
    sm.rows = source.size();
    sm.cols = target.size();
    sm.entries = last_write_wins(writes);
    sm.matched.assign(corr.begin(), corr.end());
    return sm;
}

SimilarityMatrix uniform_similarity(std::size_t target_size, std::span<const std::size_t> corr) {
    check_corr(corr, corr.size(), target_size);
    SimilarityMatrix sm;
    sm.rows = corr.size();
    sm.cols = target_size;
    sm.entries.reserve(corr.size());
    for (std::size_t i = 0; i < corr.size(); ++i) sm.entries.push_back({i, corr[i], 1.0});
    sm.matched.assign(corr.begin(), corr.end());
    return sm;
}

std::size_t distinct_count(std::span<const std::size_t> indices) {
    std::vector<std::size_t> sorted(indices.begin(), indices.end());
    std::sort(sorted.begin(), sorted.end());
    return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

RankProxy rank_proxy(const SimilarityMatrix& sm) {
    RankProxy out;
    out.distinct_targets = distinct_count(sm.matched);
    if (sm.rows <= kExactRankLimit && sm.cols <= kExactRankLimit) {
        if (sm.entries.empty()) {
            out.exact_rank = 0;
        } else {
            Eigen::BDCSVD<Eigen::MatrixXd> svd(sm.to_dense());
            const auto& s = svd.singularValues();
            const double cutoff = 1e-10 * s(0);
            out.exact_rank = static_cast<std::size_t>((s.array() > cutoff).count());
        }
    }
    return out;
}

}  // namespace cosm
