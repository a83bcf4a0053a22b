#pragma once

#include <string>
#include <vector>

#include "msode/common.hpp"

namespace msode {

// Finite latent state space.  States are 0-based internally; labels are the
// 1-based user-facing names used in files and diagnostics.
struct StateSpace {
    std::vector<std::string> labels;
    std::vector<bool> absorbing;  // per state

    int m() const { return static_cast<int>(labels.size()); }

    void validate() const {
        if (labels.size() < 2) throw ConfigError("state space needs at least 2 states");
        if (absorbing.size() != labels.size())
            throw ConfigError("absorbing flags do not match state count");
        for (std::size_t i = 0; i < labels.size(); ++i)
            for (std::size_t j = i + 1; j < labels.size(); ++j)
                if (labels[i] == labels[j])
                    throw ConfigError("duplicate state label '" + labels[i] + "'");
    }

    int index_of(const std::string& label) const {
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == label) return static_cast<int>(i);
        throw ConfigError("unknown state label '" + label + "'");
    }
};

}  // namespace msode
