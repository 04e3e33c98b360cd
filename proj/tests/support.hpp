#pragma once

#include "cosm/core.hpp"
#include "cosm/random.hpp"

#include <string>
#include <vector>

namespace testing {

inline cosm::PointCloud random_cloud(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    cosm::Rng rng(seed);
    std::vector<cosm::Point3> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pts.emplace_back(rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi));
    return cosm::PointCloud(std::move(pts));
}

inline std::string data_path(const std::string& name) { return std::string(COSM_DATA_DIR) + "/" + name; }

}  // namespace testing
