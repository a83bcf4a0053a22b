#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "msode/common.hpp"

namespace msode {

enum class EmissionKind { exact, categorical, dirichlet, categorical_dirichlet };

inline bool has_label_channel(EmissionKind k) {
    return k != EmissionKind::dirichlet;
}
inline bool has_band_channel(EmissionKind k) {
    return k == EmissionKind::dirichlet || k == EmissionKind::categorical_dirichlet;
}
inline bool has_misclassification(EmissionKind k) {
    return k == EmissionKind::categorical || k == EmissionKind::categorical_dirichlet;
}

// Observation model: an optional categorical label channel with a structural
// pattern of permitted misclassifications, and an optional composition
// ("band") channel with one Dirichlet per latent state.
struct EmissionModel {
    EmissionKind kind = EmissionKind::exact;
    // Permitted (true state, observed label) error cells, row-major order.
    // Cells absent here are structural zeros; the diagonal is implicit.
    std::vector<std::pair<int, int>> error_cells;
    std::vector<std::string> band_names;

    int n_bands() const { return static_cast<int>(band_names.size()); }
    int n_misclass_params() const {
        return has_misclassification(kind) ? static_cast<int>(error_cells.size()) : 0;
    }

    void validate(int m) const {
        if (has_misclassification(kind)) {
            int prev = -1;
            for (auto [r, o] : error_cells) {
                if (r < 0 || r >= m || o < 0 || o >= m || r == o)
                    throw ConfigError("invalid misclassification cell");
                int key = r * m + o;
                if (key <= prev)
                    throw ConfigError("misclassification cells must be unique, row-major");
                prev = key;
            }
        } else if (!error_cells.empty()) {
            throw ConfigError("misclassification cells given for a kind without a label-error channel");
        }
        if (has_band_channel(kind)) {
            if (band_names.empty()) throw ConfigError("band channel requires band names");
        } else if (!band_names.empty()) {
            throw ConfigError("band names given for a kind without a band channel");
        }
    }
};

// Misclassification matrix for logit parameters `u` (one per error cell, in
// error_cells order).  Within each row the permitted error cells get
// exp(u)/denom and the diagonal keeps 1/denom, denom = 1 + sum exp(u):
// a multinomial logit with "stay" as the reference.  Structural zeros stay
// exactly zero; rows with no permitted errors are exact.
inline Matrix misclass_matrix(const EmissionModel& em, int m, const double* u) {
    Matrix M = Matrix::Zero(m, m);
    std::vector<double> denom(m, 1.0);
    std::size_t k = 0;
    for (auto [r, o] : em.error_cells) {
        double e = std::exp(u[k++]);
        M(r, o) = e;
        denom[r] += e;
    }
    for (int r = 0; r < m; ++r) {
        for (int o = 0; o < m; ++o)
            if (r != o) M(r, o) /= denom[r];
        M(r, r) = 1.0 / denom[r];
    }
    return M;
}

// log density of the Dirichlet with concentrations conc at composition x.
// x must be a probability vector; components equal to 0 are handled by the
// continuous limit where it exists (conc >= 1) and rejected otherwise.
inline double dirichlet_logpdf(const Vector& conc, const Vector& x) {
    if (conc.size() != x.size()) throw ConfigError("band vector length mismatch");
    double lp = std::lgamma(conc.sum());
    for (Eigen::Index i = 0; i < conc.size(); ++i) {
        lp -= std::lgamma(conc[i]);
        if (x[i] <= 0.0) {
            if (conc[i] > 1.0) return -std::numeric_limits<double>::infinity();
            if (conc[i] < 1.0)
                throw NumericalError("dirichlet density unbounded at a zero band component");
            // conc == 1: term vanishes
        } else {
            lp += (conc[i] - 1.0) * std::log(x[i]);
        }
    }
    return lp;
}

}  // namespace msode
