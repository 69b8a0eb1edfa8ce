#pragma once

// Shared test fixtures: repository paths and seeded random data.

#include <random>
#include <string>

#include "gridattack/network_model.hpp"
#include "gridattack/types.hpp"

namespace testutil {

inline std::string repo_path(const std::string& relative) {
    return std::string(GRIDATTACK_REPO_DIR) + "/" + relative;
}

inline gridattack::GridCase tri3() {
    return gridattack::load_case(repo_path("data/tri3.json"));
}

inline gridattack::GridCase ieee14() {
    return gridattack::load_case(repo_path("data/ieee14.json"));
}

inline gridattack::Vec random_vec(int n, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    gridattack::Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = u(rng);
    return v;
}

}  // namespace testutil
