#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "msode/common.hpp"
#include "msode/optim.hpp"
#include "msode/panel.hpp"
#include "msode/rate_spec.hpp"
#include "msode/rng.hpp"
#include "msode/simulate.hpp"

namespace msode {

struct TransitionEvent {
    double time;
    int from, to;
};

// The subject holds `state` over (start, end]: a subject whose event fires at
// time s is still at risk at s, one entering at s is not.
struct AtRiskSegment {
    double start, end;
    int state;
};

struct CountingData {
    int m = 0;
    std::vector<TransitionEvent> events;
    std::vector<AtRiskSegment> at_risk;
    long masked_incompatible = 0;  // observed label jumps the mask forbids
};

struct StratumCounting {
    Vector covs;
    CountingData data;
};

struct StratifiedCounting {
    std::vector<StratumCounting> strata;

    long masked_incompatible() const {
        long n = 0;
        for (const auto& s : strata) n += s.data.masked_incompatible;
        return n;
    }
};

// Panel records reinterpreted as exact event data: every observed label
// change becomes one transition at the later record's time, the deliberate
// approximation under study.  Records without labels are skipped; jumps the
// mask forbids are kept and counted, not rejected.  Subjects are stratified
// by their exact covariate vector.
inline StratifiedCounting panel_to_counting(const PanelDataset& data, const RateSpec& rates) {
    StratifiedCounting out;
    auto stratum_for = [&](const Vector& covs) -> CountingData& {
        for (auto& s : out.strata)
            if (s.covs.size() == covs.size() && s.covs == covs) return s.data;
        out.strata.push_back({covs, CountingData{rates.m, {}, {}, 0}});
        return out.strata.back().data;
    };

    for (const Subject& subj : data.subjects) {
        CountingData& cd = stratum_for(subj.covs);
        double prev_t = 0;
        int prev_l = -1;
        for (const PanelRecord& rec : subj.records) {
            if (!rec.label) continue;
            if (prev_l >= 0) {
                cd.at_risk.push_back({prev_t, rec.time, prev_l});
                if (*rec.label != prev_l) {
                    cd.events.push_back({rec.time, prev_l, *rec.label});
                    if (!rates.mask[prev_l][*rec.label]) ++cd.masked_incompatible;
                }
            }
            prev_t = rec.time;
            prev_l = *rec.label;
        }
    }
    return out;
}

// Exact event data from fully observed latent paths followed to t_max.
inline CountingData paths_to_counting(const std::vector<SamplePath>& paths, double t_max,
                                      int m) {
    CountingData cd;
    cd.m = m;
    for (const SamplePath& p : paths) {
        for (std::size_t k = 1; k < p.times.size(); ++k) {
            cd.at_risk.push_back({p.times[k - 1], p.times[k], p.states[k - 1]});
            cd.events.push_back({p.times[k], p.states[k - 1], p.states[k]});
        }
        if (t_max > p.times.back())
            cd.at_risk.push_back({p.times.back(), t_max, p.states.back()});
    }
    return cd;
}

struct StepFunction {
    std::vector<double> times;   // ascending jump times
    std::vector<double> values;  // value at and after times[k]; 0 before t[0]

    double at(double t) const {
        auto it = std::upper_bound(times.begin(), times.end(), t);
        return it == times.begin() ? 0.0
                                   : values[static_cast<std::size_t>(it - times.begin()) - 1];
    }
};

struct CumulativeHazard {
    int m = 0;
    std::map<std::pair<int, int>, StepFunction> fn;

    const StepFunction* find(int from, int to) const {
        auto it = fn.find({from, to});
        return it == fn.end() ? nullptr : &it->second;
    }
    double at(int from, int to, double t) const {
        const StepFunction* f = find(from, to);
        return f ? f->at(t) : 0.0;
    }
};

namespace detail {

// at-risk counts by binary search over segment edges: Y_r(s) counts segments
// with start < s <= end, i.e. (#starts < s) - (#ends < s)
class AtRiskIndex {
  public:
    AtRiskIndex(const CountingData& cd) : starts_(cd.m), ends_(cd.m) {
        for (const auto& seg : cd.at_risk) {
            starts_[seg.state].push_back(seg.start);
            ends_[seg.state].push_back(seg.end);
        }
        for (int r = 0; r < cd.m; ++r) {
            std::sort(starts_[r].begin(), starts_[r].end());
            std::sort(ends_[r].begin(), ends_[r].end());
        }
    }

    long count(int state, double s) const {
        auto before = [&](const std::vector<double>& v) {
            return std::lower_bound(v.begin(), v.end(), s) - v.begin();
        };
        return before(starts_[state]) - before(ends_[state]);
    }

  private:
    std::vector<std::vector<double>> starts_, ends_;
};

// events grouped by time: (time, per-(from,to) counts)
inline std::vector<std::pair<double, std::map<std::pair<int, int>, long>>> group_events(
    const CountingData& cd) {
    std::vector<TransitionEvent> ev = cd.events;
    std::sort(ev.begin(), ev.end(),
              [](const TransitionEvent& a, const TransitionEvent& b) { return a.time < b.time; });
    std::vector<std::pair<double, std::map<std::pair<int, int>, long>>> grouped;
    for (const auto& e : ev) {
        if (grouped.empty() || grouped.back().first != e.time) grouped.push_back({e.time, {}});
        ++grouped.back().second[{e.from, e.to}];
    }
    return grouped;
}

}  // namespace detail

// Cumulative transition rates: at each event time the estimate of transition
// (r, j) jumps by (events of that type) / (subjects at risk in r).
inline CumulativeHazard nelson_aalen(const CountingData& cd) {
    CumulativeHazard out;
    out.m = cd.m;
    detail::AtRiskIndex risk(cd);
    std::map<std::pair<int, int>, double> cum;
    for (const auto& [s, counts] : detail::group_events(cd)) {
        for (const auto& [pair, dn] : counts) {
            long y = risk.count(pair.first, s);
            if (y <= 0)
                throw ConfigError("transition event with no subjects at risk at t = " +
                                  std::to_string(s));
            double& c = cum[pair];
            c += static_cast<double>(dn) / static_cast<double>(y);
            out.fn[pair].times.push_back(s);
            out.fn[pair].values.push_back(c);
        }
    }
    return out;
}

struct StepMatrix {
    int m = 0;
    std::vector<double> times;
    std::vector<Matrix> values;

    Matrix at(double t) const {
        auto it = std::upper_bound(times.begin(), times.end(), t);
        return it == times.begin() ? Matrix::Identity(m, m).eval()
                                   : values[static_cast<std::size_t>(it - times.begin()) - 1];
    }
};

// Product-limit transition probabilities: ordered product of (I + dA(s)) with
// every event at one time folded into a single factor, so ties cannot depend
// on processing order.
inline StepMatrix aalen_johansen(const CountingData& cd) {
    StepMatrix out;
    out.m = cd.m;
    detail::AtRiskIndex risk(cd);
    Matrix p = Matrix::Identity(cd.m, cd.m);
    for (const auto& [s, counts] : detail::group_events(cd)) {
        Matrix factor = Matrix::Identity(cd.m, cd.m);
        for (const auto& [pair, dn] : counts) {
            long y = risk.count(pair.first, s);
            if (y <= 0)
                throw ConfigError("transition event with no subjects at risk at t = " +
                                  std::to_string(s));
            double jump = static_cast<double>(dn) / static_cast<double>(y);
            factor(pair.first, pair.second) += jump;
            factor(pair.first, pair.first) -= jump;
        }
        for (int r = 0; r < cd.m; ++r)
            if (factor(r, r) < 0)
                throw ConfigError("more transition events than subjects at risk at t = " +
                                  std::to_string(s));
        p = (p * factor).eval();
        // rows of the product sum to one by construction; re-pin the diagonal
        // so rounding in the multiply cannot drift that invariant
        for (int r = 0; r < cd.m; ++r) {
            double off = 0;
            for (int j = 0; j < cd.m; ++j)
                if (j != r) off += p(r, j);
            p(r, r) = 1.0 - off;
        }
        out.times.push_back(s);
        out.values.push_back(p);
    }
    return out;
}

// Integrated log-linear rate q(s) = exp(b0 + b1 s + b' x) from 0 to t, with
// the analytic b1 -> 0 limit substituted near zero.
inline double integrated_rate(const Vector& beta, double t, const Vector& covs) {
    double eta0 = beta[0];
    for (Eigen::Index k = 0; k < covs.size(); ++k) eta0 += beta[2 + k] * covs[k];
    const double b1 = beta[1];
    if (std::abs(b1) < 1e-8) return t * std::exp(eta0);
    return (std::exp(eta0 + b1 * t) - std::exp(eta0)) / b1;
}

struct RateRecovery {
    Vector beta;  // (intercept, time slope, covariate effects...)
    double objective = 0;
};

// Least-absolute-deviation fit of the integrated log-linear rate to one
// transition's cumulative-hazard steps across covariate strata, by simplex
// search with random restarts.
inline RateRecovery recover_rate_coefficients(
    const std::vector<std::pair<Vector, StepFunction>>& strata, Rng& rng, int starts = 5,
    const NmOptions& opt = {}) {
    if (strata.empty()) throw ConfigError("no strata to fit");
    const Eigen::Index n_cov = strata[0].first.size();
    std::size_t n_pts = 0;
    for (const auto& [covs, fn] : strata) {
        if (covs.size() != n_cov) throw ConfigError("strata disagree on covariate length");
        n_pts += fn.times.size();
    }
    if (n_pts == 0) throw ConfigError("no jump times to fit");

    auto objective = [&](const Vector& beta) {
        double acc = 0;
        for (const auto& [covs, fn] : strata)
            for (std::size_t k = 0; k < fn.times.size(); ++k)
                acc += std::abs(integrated_rate(beta, fn.times[k], covs) - fn.values[k]);
        return acc;
    };
    NmResult r = nelder_mead_multistart(objective, Vector::Zero(2 + n_cov), starts, rng, opt);
    return {r.x, r.fval};
}

}  // namespace msode
