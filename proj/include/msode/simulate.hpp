#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "msode/common.hpp"
#include "msode/likelihood.hpp"
#include "msode/model.hpp"
#include "msode/panel.hpp"
#include "msode/rng.hpp"

namespace msode {

// Inter-observation-time scheme: gaps are sampled from a weighted list, or
// cycled deterministically when `grid` is set (one gap = regular schedule).
struct ObservationScheme {
    std::vector<double> gaps = {1.0};
    std::vector<double> weights;  // empty: uniform; must sum to 1 otherwise
    bool grid = false;

    void validate() const {
        if (gaps.empty()) throw ConfigError("observation scheme needs at least one gap");
        for (double g : gaps)
            if (!(g > 0)) throw ConfigError("observation gaps must be positive");
        if (!weights.empty()) {
            if (weights.size() != gaps.size())
                throw ConfigError("gap weights must match the gap list");
            double s = 0;
            for (double w : weights) {
                if (w < 0) throw ConfigError("gap weights must be nonnegative");
                s += w;
            }
            if (std::abs(s - 1.0) > 1e-9) throw ConfigError("gap weights must sum to 1");
        }
    }
    double min_gap() const { return *std::min_element(gaps.begin(), gaps.end()); }
};

struct SimConfig {
    int n_subjects = 200;
    double t_max = 10.0;
    ObservationScheme scheme;
    std::vector<double> covariate_freq;  // Bernoulli frequency per covariate
    std::uint64_t seed = 1;
    std::uint64_t rep = 0;  // replicate index, stirred into every stream
};

// Event-level latent trajectory: state states[k] entered at times[k].
struct SamplePath {
    std::vector<double> times;
    std::vector<int> states;

    int state_at(double t) const {
        auto it = std::upper_bound(times.begin(), times.end(), t);
        return states[static_cast<std::size_t>(it - times.begin()) - 1];
    }
};

namespace detail {

// time-slope coefficient of one transition's log rate (0 if no time term)
inline double time_slope(const ModelSpec& spec, const Vector& theta, int j) {
    const auto& terms = spec.rates.transitions[j].terms;
    for (std::size_t k = 0; k < terms.size(); ++k)
        if (terms[k].kind == RateTerm::time)
            return theta[spec.layout.transition_offsets[j] + static_cast<Eigen::Index>(k)];
    return 0.0;
}

inline int draw_index(const std::vector<std::pair<int, double>>& weighted, double total,
                      Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng) * total, c = 0;
    for (const auto& [idx, w] : weighted) {
        c += w;
        if (u < c) return idx;
    }
    return weighted.back().first;
}

}  // namespace detail

// Exact simulation by thinning.  Each log rate is affine in t, so the total
// exit rate is a sum of convex functions and its maximum over a window sits
// at an endpoint: with every time slope >= 0 the window end is an exact
// bound, otherwise the maximum over a grid that includes both endpoints is.
inline SamplePath simulate_path(const ModelSpec& spec, const Vector& theta, const Vector& covs,
                                double t_max, Rng& rng, double window = 0.1) {
    if (!(t_max > 0)) throw ConfigError("follow-up horizon must be positive");
    if (!(window > 0)) throw ConfigError("lookahead window must be positive");
    const int m = spec.m();

    std::vector<char> end_is_bound(m, 1);
    for (int j = 0; j < spec.rates.n_transitions(); ++j)
        if (detail::time_slope(spec, theta, j) < 0)
            end_is_bound[spec.rates.transitions[j].from] = 0;

    SamplePath path;
    Vector pi = initial_distribution(spec.init, spec.layout, theta);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int r = m - 1;
    {
        double u = unif(rng), c = 0;
        for (int s = 0; s < m; ++s) {
            c += pi[s];
            if (u < c) {
                r = s;
                break;
            }
        }
    }
    path.times.push_back(0.0);
    path.states.push_back(r);
    if (spec.states.absorbing[r]) return path;

    std::vector<std::pair<int, double>> exits;
    std::exponential_distribution<double> expo(1.0);
    double t = 0.0;
    while (t < t_max) {
        double bound;
        if (end_is_bound[r]) {
            bound = exit_rates(spec, theta, r, t + window, covs, exits);
        } else {
            bound = 0.0;
            for (int k = 0; k <= 8; ++k)
                bound = std::max(bound,
                                 exit_rates(spec, theta, r, t + window * k / 8.0, covs, exits));
        }
        if (exits.empty()) break;  // trap state: no exit ever fires
        if (!(bound > 0)) throw ConfigError("thinning bound is not positive");

        double e = expo(rng) / bound;
        if (e > window) {
            t += window;
            continue;
        }
        t += e;
        if (t >= t_max) break;
        double total = exit_rates(spec, theta, r, t, covs, exits);
        if (unif(rng) * bound < total) {
            int dest = detail::draw_index(exits, total, rng);
            path.times.push_back(t);
            path.states.push_back(dest);
            r = dest;
            if (spec.states.absorbing[r]) break;
        }
    }
    return path;
}

// Panel records for one path: at each observation time the latent state is
// read off the path, the label is drawn from its misclassification row and
// bands from its Dirichlet.  An absorbing observation ends the sequence.
inline std::vector<PanelRecord> observe_path(const ModelSpec& spec, const Vector& theta,
                                             const SamplePath& path,
                                             const std::vector<double>& obs_times, Rng& rng) {
    EmissionContext ctx(spec, theta);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<PanelRecord> recs;
    for (double t : obs_times) {
        const int s = path.state_at(t);
        PanelRecord rec;
        rec.time = t;
        if (has_label_channel(spec.emission.kind)) {
            int label = s;
            if (has_misclassification(spec.emission.kind)) {
                double u = unif(rng), c = 0;
                label = spec.m() - 1;
                for (int o = 0; o < spec.m(); ++o) {
                    c += ctx.misclass(s, o);
                    if (u < c) {
                        label = o;
                        break;
                    }
                }
            }
            rec.label = label;
        }
        if (has_band_channel(spec.emission.kind)) {
            Vector conc = ctx.conc.row(s).transpose();
            rec.bands = dirichlet_draw(conc, rng);
        }
        recs.push_back(std::move(rec));
        if (spec.states.absorbing[s]) break;
    }
    return recs;
}

inline std::vector<double> draw_observation_times(const ObservationScheme& sch, double t_max,
                                                  Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> ts = {0.0};
    std::size_t cycle = 0;
    for (;;) {
        double gap;
        if (sch.grid) {
            gap = sch.gaps[cycle++ % sch.gaps.size()];
        } else if (sch.weights.empty()) {
            gap = sch.gaps[std::min<std::size_t>(
                static_cast<std::size_t>(unif(rng) * sch.gaps.size()), sch.gaps.size() - 1)];
        } else {
            double u = unif(rng), c = 0;
            gap = sch.gaps.back();
            for (std::size_t k = 0; k < sch.gaps.size(); ++k) {
                c += sch.weights[k];
                if (u < c) {
                    gap = sch.gaps[k];
                    break;
                }
            }
        }
        double next = ts.back() + gap;
        if (next > t_max) break;
        ts.push_back(next);
    }
    return ts;
}

struct StudyResult {
    PanelDataset data;
    std::vector<SamplePath> paths;  // aligned with data.subjects
};

// One synthetic study.  Covariates, latent path, and observation draws use
// separate per-subject streams keyed (seed; rep, subject, channel), so the
// output is reproducible and the latent law is untouched by scheme changes.
inline StudyResult simulate_study(const ModelSpec& spec, const Vector& theta,
                                  const SimConfig& cfg) {
    cfg.scheme.validate();
    if (!(cfg.t_max > 0)) throw ConfigError("follow-up horizon must be positive");
    if (cfg.n_subjects < 0) throw ConfigError("subject count must be nonnegative");
    const std::size_t nc = spec.rates.covariate_names.size();
    if (cfg.covariate_freq.size() != nc)
        throw ConfigError("covariate frequency list must match the covariate count");

    const double window = std::min(cfg.scheme.min_gap() / 2.0, 0.1);
    StudyResult out;
    out.data.cov_names = spec.rates.covariate_names;
    out.data.band_names = spec.emission.band_names;

    for (int i = 0; i < cfg.n_subjects; ++i) {
        const auto sid = static_cast<std::uint64_t>(i);
        Rng cov_rng = make_rng(cfg.seed, {cfg.rep, sid, 0});
        Rng path_rng = make_rng(cfg.seed, {cfg.rep, sid, 1});
        Rng obs_rng = make_rng(cfg.seed, {cfg.rep, sid, 2});

        std::uniform_real_distribution<double> unif(0.0, 1.0);
        Vector covs(static_cast<Eigen::Index>(nc));
        for (std::size_t k = 0; k < nc; ++k)
            covs[static_cast<Eigen::Index>(k)] = unif(cov_rng) < cfg.covariate_freq[k] ? 1.0 : 0.0;

        SamplePath path = simulate_path(spec, theta, covs, cfg.t_max, path_rng, window);
        std::vector<double> ts = draw_observation_times(cfg.scheme, cfg.t_max, obs_rng);

        Subject subj;
        subj.id = i + 1;
        subj.covs = covs;
        subj.records = observe_path(spec, theta, path, ts, obs_rng);
        out.data.subjects.push_back(std::move(subj));
        out.paths.push_back(std::move(path));
    }
    return out;
}

// Multiplies every transition's time-slope coefficient; mirrors the study
// construction that stretches rate inhomogeneity by a fixed factor.
inline Vector scale_time_coefficients(const ModelSpec& spec, Vector theta, double factor) {
    for (int j = 0; j < spec.rates.n_transitions(); ++j) {
        const auto& terms = spec.rates.transitions[j].terms;
        for (std::size_t k = 0; k < terms.size(); ++k)
            if (terms[k].kind == RateTerm::time)
                theta[spec.layout.transition_offsets[j] + static_cast<Eigen::Index>(k)] *= factor;
    }
    return theta;
}

}  // namespace msode
