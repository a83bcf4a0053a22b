#pragma once

#include <atomic>
#include <chrono>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "msode/common.hpp"
#include "msode/model.hpp"
#include "msode/transition.hpp"

namespace msode {

// Emission quantities that depend on theta but not on the record: the
// misclassification matrix and the per-state Dirichlet concentrations.
struct EmissionContext {
    Matrix misclass;  // empty unless the label channel has misclassification
    Matrix conc;      // empty unless there is a band channel

    EmissionContext(const ModelSpec& spec, const Vector& theta) {
        if (has_misclassification(spec.emission.kind))
            misclass = misclass_matrix(spec.emission, spec.m(),
                                       theta.data() + spec.layout.misclass_offset);
        if (has_band_channel(spec.emission.kind))
            conc = emission_concentrations(spec.layout, theta);
    }
};

// Diagonal of the emission matrix D for one record: for each latent state s,
// (label probability) x (band density), with an absent channel contributing 1.
// A missing label therefore yields the identity label factor.
inline Vector emission_diag(const ModelSpec& spec, const EmissionContext& ctx,
                            const PanelRecord& rec) {
    const int m = spec.m();
    Vector d = Vector::Ones(m);
    if (rec.label && has_label_channel(spec.emission.kind)) {
        if (has_misclassification(spec.emission.kind)) {
            for (int s = 0; s < m; ++s) d[s] = ctx.misclass(s, *rec.label);
        } else {
            for (int s = 0; s < m; ++s) d[s] = (s == *rec.label) ? 1.0 : 0.0;
        }
    }
    if (rec.bands && has_band_channel(spec.emission.kind)) {
        for (int s = 0; s < m; ++s)
            d[s] *= std::exp(dirichlet_logpdf(ctx.conc.row(s), *rec.bands));
    }
    return d;
}

struct LogLikResult {
    double total = 0;
    Vector per_subject;
    double eval_seconds = 0;
};

namespace detail {

// One factor cache per covariate pattern; with the cell anchor this realizes
// the (cell, width, covariates) cache key.
class CacheSet {
  public:
    FactorCache* for_covs(const Vector& covs) {
        for (auto& [c, cache] : entries_)
            if (c.size() == covs.size() && c == covs) return cache.get();
        entries_.emplace_back(covs, std::make_unique<FactorCache>());
        return entries_.back().second.get();
    }

  private:
    std::vector<std::pair<Vector, std::unique_ptr<FactorCache>>> entries_;
};

inline double subject_loglik(const ModelSpec& spec, const Vector& theta, const Subject& subj,
                             const EngineConfig& cfg, const EmissionContext& ctx,
                             const Vector& pi, CacheSet& caches) {
    const int m = spec.m();
    std::vector<double> times;
    times.reserve(subj.records.size());
    for (const auto& r : subj.records) times.push_back(r.time);

    FactorCache* cache = cfg.kind == EngineKind::piecewise ? caches.for_covs(subj.covs) : nullptr;
    ModelRateFn rate{spec, theta, subj.covs};
    std::vector<Matrix> factors = interval_factors(rate, m, times, cfg, cache);

    // scaled forward recursion: renormalize each step, accumulate the log
    Eigen::RowVectorXd alpha = (pi.array() * emission_diag(spec, ctx, subj.records[0]).array())
                                   .matrix()
                                   .transpose();
    double ll = 0;
    double c = alpha.sum();
    if (!(c > 0)) return -std::numeric_limits<double>::infinity();
    ll += std::log(c);
    alpha /= c;
    for (std::size_t k = 0; k + 1 < subj.records.size(); ++k) {
        Eigen::RowVectorXd prop = alpha * factors[k];
        alpha = (prop.array() * emission_diag(spec, ctx, subj.records[k + 1]).transpose().array())
                    .matrix();
        c = alpha.sum();
        if (!(c > 0)) return -std::numeric_limits<double>::infinity();
        ll += std::log(c);
        alpha /= c;
    }
    return ll;
}

}  // namespace detail

// Panel log likelihood: product over subjects of
//   pi' D_1 P(t_1,t_2) D_2 ... D_n 1.
// Impossible data returns -inf (a value, not an error); numerical failures
// throw.  per_subject sums to total by construction, and the reduction is an
// ordered sum over subject index regardless of worker count.
inline LogLikResult loglik(const ModelSpec& spec, const Vector& theta, const PanelDataset& data,
                           const EngineConfig& cfg = {}, int workers = 1) {
    auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = data.subjects.size();
    LogLikResult res;
    res.per_subject = Vector::Zero(n);

    EmissionContext ctx(spec, theta);
    Vector pi = initial_distribution(spec.init, spec.layout, theta);

    int nw = std::max(1, std::min<int>(workers, static_cast<int>(n)));
    if (nw <= 1) {
        detail::CacheSet caches;
        for (std::size_t i = 0; i < n; ++i)
            res.per_subject[i] =
                detail::subject_loglik(spec, theta, data.subjects[i], cfg, ctx, pi, caches);
    } else {
        std::vector<std::thread> pool;
        std::exception_ptr error;
        std::mutex error_mu;
        std::atomic<std::size_t> next{0};
        auto run = [&] {
            detail::CacheSet caches;
            try {
                // block assignment keeps cache locality; work is per-subject
                for (;;) {
                    std::size_t i = next.fetch_add(1);
                    if (i >= n) break;
                    res.per_subject[i] = detail::subject_loglik(spec, theta, data.subjects[i],
                                                                cfg, ctx, pi, caches);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lk(error_mu);
                if (!error) error = std::current_exception();
            }
        };
        for (int w = 0; w < nw; ++w) pool.emplace_back(run);
        for (auto& th : pool) th.join();
        if (error) std::rethrow_exception(error);
    }

    double total = 0;
    for (std::size_t i = 0; i < n; ++i) total += res.per_subject[i];  // fixed order
    res.total = total;
    res.eval_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace msode
