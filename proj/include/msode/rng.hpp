#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace msode {

using Rng = std::mt19937_64;

// Derive an independent stream from a base seed plus stream coordinates
// (replicate, subject, channel...).  Keeps per-subject draws independent of
// iteration order and worker count.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {}) {
    std::seed_seq seq = [&] {
        std::vector<std::uint32_t> words;
        auto push = [&](std::uint64_t v) {
            words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
            words.push_back(static_cast<std::uint32_t>(v >> 32));
        };
        push(seed);
        for (auto v : stream) push(v);
        return std::seed_seq(words.begin(), words.end());
    }();
    return Rng(seq);
}

inline Eigen::VectorXd dirichlet_draw(const Eigen::VectorXd& conc, Rng& rng) {
    Eigen::VectorXd x(conc.size());
    double total = 0;
    for (Eigen::Index i = 0; i < conc.size(); ++i) {
        std::gamma_distribution<double> g(conc[i], 1.0);
        x[i] = g(rng);
        total += x[i];
    }
    return x / total;
}

}  // namespace msode
