#pragma once

// Shared model builders for tests: a 2-state progressive model, a 4-state
// forward model with misclassification (label channel), and a 4-state fully
// connected model with label + band channels.

#include <random>

#include "msode/model.hpp"

namespace fixtures {

using namespace msode;

inline RateTerm term_intercept() { return {RateTerm::intercept}; }
inline RateTerm term_time() { return {RateTerm::time}; }
inline RateTerm term_cov(int k) { return {RateTerm::covariate, k}; }

inline std::vector<std::vector<bool>> mask_from(int m, std::initializer_list<std::pair<int, int>> cells) {
    std::vector<std::vector<bool>> mask(m, std::vector<bool>(m, false));
    for (auto [r, c] : cells) mask[r][c] = true;
    return mask;
}

// 2 states, one forward transition, log q = b0 + b1 t.  Initial state fixed
// to state 1.  Exact observation.
inline ModelSpec twostate_progressive() {
    ModelSpec spec;
    spec.states.labels = {"alive", "gone"};
    spec.states.absorbing = {false, true};
    spec.rates.m = 2;
    spec.rates.mask = mask_from(2, {{0, 1}});
    spec.rates.transitions = {{0, 1, {term_intercept(), term_time()}}};
    spec.init.estimate = false;
    spec.init.fixed_probs = Vector::Zero(2);
    spec.init.fixed_probs[0] = 1.0;
    spec.finalize();
    return spec;
}

// 2 states, both directions, log-linear in time, estimated initial
// distribution, exact observation.
inline ModelSpec twostate_reversible() {
    ModelSpec spec;
    spec.states.labels = {"up", "down"};
    spec.states.absorbing = {false, false};
    spec.rates.m = 2;
    spec.rates.mask = mask_from(2, {{0, 1}, {1, 0}});
    spec.rates.transitions = {{0, 1, {term_intercept(), term_time()}},
                              {1, 0, {term_intercept(), term_time()}}};
    spec.finalize();
    return spec;
}

// 4-state forward model: 1->2, 1->4, 2->3, 2->4, 3->4, log-linear in time
// and one binary covariate, misclassification between adjacent transient
// states, estimated initial distribution.
inline ModelSpec forward4_hmm() {
    ModelSpec spec;
    spec.states.labels = {"well", "mild", "severe", "dead"};
    spec.states.absorbing = {false, false, false, true};
    spec.rates.m = 4;
    spec.rates.mask = mask_from(4, {{0, 1}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
    spec.rates.covariate_names = {"sex"};
    std::vector<RateTerm> design = {term_intercept(), term_time(), term_cov(0)};
    spec.rates.transitions = {{0, 1, design}, {0, 3, design}, {1, 2, design},
                              {1, 3, design}, {2, 3, design}};
    spec.emission.kind = EmissionKind::categorical;
    spec.emission.error_cells = {{0, 1}, {1, 0}, {1, 2}, {2, 1}};
    spec.finalize();
    return spec;
}

// 4-state fully connected transient block with absorbing state 4, label
// channel with adjacent-state errors plus a 4-band composition channel.
inline ModelSpec full4_bands() {
    ModelSpec spec;
    spec.states.labels = {"wake", "nrem", "rem", "off"};
    spec.states.absorbing = {false, false, false, true};
    spec.rates.m = 4;
    spec.rates.mask = mask_from(4, {{0, 1}, {0, 2}, {0, 3}, {1, 0}, {1, 2}, {1, 3},
                                    {2, 0}, {2, 1}, {2, 3}});
    std::vector<RateTerm> design = {term_intercept(), term_time()};
    spec.rates.transitions = {{0, 1, design}, {0, 2, design}, {0, 3, design},
                              {1, 0, design}, {1, 2, design}, {1, 3, design},
                              {2, 0, design}, {2, 1, design}, {2, 3, design}};
    spec.emission.kind = EmissionKind::categorical_dirichlet;
    spec.emission.error_cells = {{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}};
    spec.emission.band_names = {"delta", "theta", "alpha", "beta"};
    spec.finalize();
    return spec;
}

// 3-state model with time slopes of both signs, entry fixed at the first
// state, absorbing third state, exact observation.
inline ModelSpec threestate_mixed() {
    ModelSpec spec;
    spec.states.labels = {"a", "b", "c"};
    spec.states.absorbing = {false, false, true};
    spec.rates.m = 3;
    spec.rates.mask = mask_from(3, {{0, 1}, {0, 2}, {1, 0}, {1, 2}});
    std::vector<RateTerm> design = {term_intercept(), term_time()};
    spec.rates.transitions = {{0, 1, design}, {0, 2, design}, {1, 0, design}, {1, 2, design}};
    spec.init.estimate = false;
    spec.init.fixed_probs = Vector::Zero(3);
    spec.init.fixed_probs[0] = 1.0;
    spec.finalize();
    return spec;
}

// (b0, b1) per transition of threestate_mixed, row-major mask order
inline Vector threestate_mixed_theta() {
    Vector theta(8);
    theta << -0.3, 0.35, -1.2, -0.2, -0.6, -0.3, -1.0, 0.25;
    return theta;
}

// Random conservative generator: off-diagonal entries ~ U(lo, hi) on a given
// mask density, diagonal = -(row sum).
inline Matrix random_generator(int m, std::mt19937_64& rng, double lo = 0.05, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix q = Matrix::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j)
            if (i != j) {
                q(i, j) = u(rng);
                q(i, i) -= q(i, j);
            }
    }
    return q;
}

inline Vector random_theta(const ParameterLayout& lay, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Vector theta(lay.dim);
    for (int i = 0; i < lay.dim; ++i) theta[i] = n(rng);
    return theta;
}

}  // namespace fixtures
