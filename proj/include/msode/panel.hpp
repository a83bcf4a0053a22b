#pragma once

#include <optional>
#include <string>
#include <vector>

#include "msode/common.hpp"

namespace msode {

// One visit: time, an optional observed label (0-based), an optional
// composition vector.  Both channels missing is legal (time-only record).
struct PanelRecord {
    double time = 0;
    std::optional<int> label;
    std::optional<Vector> bands;
};

struct Subject {
    long id = 0;
    Vector covs;  // baseline covariates, fixed over time
    std::vector<PanelRecord> records;
};

struct PanelDataset {
    std::vector<Subject> subjects;
    std::vector<std::string> cov_names;
    std::vector<std::string> band_names;

    std::size_t n_subjects() const { return subjects.size(); }

    // Enforced at ingestion so downstream code can assume clean panels:
    // strictly increasing times per subject (equal adjacent timestamps are
    // rejected, not merged), labels in range, bands on the simplex to 1e-9.
    void validate(int m) const {
        for (const auto& s : subjects) {
            if (s.records.empty())
                throw ConfigError("subject " + std::to_string(s.id) + " has no records");
            if (static_cast<std::size_t>(s.covs.size()) != cov_names.size())
                throw ConfigError("subject " + std::to_string(s.id) + " covariate count mismatch");
            for (std::size_t k = 0; k < s.records.size(); ++k) {
                const auto& r = s.records[k];
                if (k > 0 && !(r.time > s.records[k - 1].time))
                    throw ConfigError("subject " + std::to_string(s.id) +
                                      ": observation times must be strictly increasing (t = " +
                                      std::to_string(r.time) + ")");
                if (r.label && (*r.label < 0 || *r.label >= m))
                    throw ConfigError("subject " + std::to_string(s.id) + ": label out of range");
                if (r.bands) {
                    if (static_cast<std::size_t>(r.bands->size()) != band_names.size())
                        throw ConfigError("subject " + std::to_string(s.id) + ": band count mismatch");
                    double sum = 0;
                    for (Eigen::Index i = 0; i < r.bands->size(); ++i) {
                        if ((*r.bands)[i] < -1e-9)
                            throw ConfigError("subject " + std::to_string(s.id) +
                                              ": negative band component");
                        sum += (*r.bands)[i];
                    }
                    if (std::abs(sum - 1.0) > 1e-9)
                        throw ConfigError("subject " + std::to_string(s.id) +
                                          ": band components must sum to 1");
                }
            }
        }
    }
};

}  // namespace msode
