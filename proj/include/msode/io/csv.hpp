#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "msode/common.hpp"
#include "msode/panel.hpp"

namespace msode {

// Shortest decimal string that reads back to the same double.
inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    double back = 0;
    if (std::sscanf(buf, "%lf", &back) == 1 && back == x) {
        for (int prec = 1; prec < 17; ++prec) {
            char probe[32];
            std::snprintf(probe, sizeof probe, "%.*g", prec, x);
            if (std::sscanf(probe, "%lf", &back) == 1 && back == x) return probe;
        }
    }
    return buf;
}

struct Table {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<long> line_no;  // source line of each row, for error anchors

    int column(const std::string& name) const {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name) return static_cast<int>(k);
        throw ConfigError(path + ": missing required column '" + name + "'");
    }
    std::optional<int> find_column(const std::string& name) const {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name) return static_cast<int>(k);
        return std::nullopt;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(trim(cell));
            cell.clear();
        } else {
            cell += ch;
        }
    }
    out.push_back(trim(cell));
    return out;
}

inline std::string anchor(const std::string& path, long line) {
    return path + ":" + std::to_string(line) + ": ";
}

inline double parse_double(const std::string& cell, const std::string& path, long line) {
    try {
        std::size_t used = 0;
        double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(anchor(path, line) + "expected a number, got '" + cell + "'");
    }
}

inline long parse_long(const std::string& cell, const std::string& path, long line) {
    try {
        std::size_t used = 0;
        long v = std::stol(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(anchor(path, line) + "expected an integer, got '" + cell + "'");
    }
}

}  // namespace detail

inline Table read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    Table t;
    t.path = path;
    std::string line;
    long n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (detail::trim(line).empty()) continue;
        std::vector<std::string> cells = detail::split_csv(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
        } else {
            if (cells.size() != t.header.size())
                throw ConfigError(detail::anchor(path, n) + "expected " +
                                  std::to_string(t.header.size()) + " cells, got " +
                                  std::to_string(cells.size()));
            t.rows.push_back(std::move(cells));
            t.line_no.push_back(n);
        }
    }
    if (t.header.empty()) throw ConfigError(path + ": missing header row");
    return t;
}

inline void write_table(const std::string& path, const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    for (std::size_t k = 0; k < header.size(); ++k)
        out << (k ? "," : "") << header[k];
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << row[k];
        out << "\n";
    }
    if (!out) throw ConfigError("write failed for " + path);
}

// Long-format panel: one row per visit, states 1-based in the file, empty
// obs_state for a missing label, covariates as cov_<name>, bands as
// emit_<name> (either all present or all empty on a row).
inline void write_panel(const std::string& path, const PanelDataset& data) {
    std::vector<std::string> header = {"subject_id", "time", "obs_state"};
    for (const auto& c : data.cov_names) header.push_back("cov_" + c);
    for (const auto& b : data.band_names) header.push_back("emit_" + b);

    std::vector<std::vector<std::string>> rows;
    for (const Subject& s : data.subjects) {
        for (const PanelRecord& r : s.records) {
            std::vector<std::string> row = {std::to_string(s.id), format_double(r.time),
                                            r.label ? std::to_string(*r.label + 1) : ""};
            for (Eigen::Index k = 0; k < s.covs.size(); ++k)
                row.push_back(format_double(s.covs[k]));
            for (std::size_t k = 0; k < data.band_names.size(); ++k)
                row.push_back(r.bands ? format_double((*r.bands)[static_cast<Eigen::Index>(k)])
                                      : "");
            rows.push_back(std::move(row));
        }
    }
    write_table(path, header, rows);
}

inline PanelDataset read_panel(const std::string& path) {
    Table t = read_table(path);
    const int c_id = t.column("subject_id");
    const int c_time = t.column("time");
    const int c_state = t.column("obs_state");

    PanelDataset data;
    std::vector<int> cov_cols, band_cols;
    for (std::size_t k = 0; k < t.header.size(); ++k) {
        if (t.header[k].rfind("cov_", 0) == 0) {
            data.cov_names.push_back(t.header[k].substr(4));
            cov_cols.push_back(static_cast<int>(k));
        } else if (t.header[k].rfind("emit_", 0) == 0) {
            data.band_names.push_back(t.header[k].substr(5));
            band_cols.push_back(static_cast<int>(k));
        }
    }

    std::map<long, std::size_t> index;  // subject id -> slot, first-seen order kept
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const long ln = t.line_no[r];
        const long id = detail::parse_long(row[c_id], path, ln);

        Vector covs(static_cast<Eigen::Index>(cov_cols.size()));
        for (std::size_t k = 0; k < cov_cols.size(); ++k)
            covs[static_cast<Eigen::Index>(k)] = detail::parse_double(row[cov_cols[k]], path, ln);

        auto it = index.find(id);
        if (it == index.end()) {
            it = index.emplace(id, data.subjects.size()).first;
            Subject s;
            s.id = id;
            s.covs = covs;
            data.subjects.push_back(std::move(s));
        } else if (covs != data.subjects[it->second].covs) {
            throw ConfigError(detail::anchor(path, ln) + "subject " + std::to_string(id) +
                              " changes covariates mid-panel");
        }

        PanelRecord rec;
        rec.time = detail::parse_double(row[c_time], path, ln);
        if (!row[c_state].empty()) {
            long s = detail::parse_long(row[c_state], path, ln);
            if (s < 1) throw ConfigError(detail::anchor(path, ln) + "obs_state must be >= 1");
            rec.label = static_cast<int>(s - 1);
        }
        std::size_t n_empty = 0;
        for (int c : band_cols) n_empty += row[c].empty();
        if (!band_cols.empty() && n_empty == 0) {
            Vector bands(static_cast<Eigen::Index>(band_cols.size()));
            for (std::size_t k = 0; k < band_cols.size(); ++k)
                bands[static_cast<Eigen::Index>(k)] =
                    detail::parse_double(row[band_cols[k]], path, ln);
            rec.bands = std::move(bands);
        } else if (n_empty != band_cols.size()) {
            throw ConfigError(detail::anchor(path, ln) +
                              "band cells must be all present or all empty");
        }
        data.subjects[it->second].records.push_back(std::move(rec));
    }
    return data;
}

}  // namespace msode
