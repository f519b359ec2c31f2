#pragma once

#include <fstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "roughmag/grid.hpp"

namespace roughmag {

inline constexpr std::string_view kVersion = "roughmag 1.0.0";

struct StatRow {
    double eps = 0.0;  // eps or mass ladder value; 0 for closed-form rows
    std::string statistic;
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 1;
};

struct CriterionResult {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct Report {
    std::string name;
    std::vector<StatRow> rows;
    std::vector<CriterionResult> criteria;
    std::vector<std::pair<std::string, std::string>> meta;

    bool all_pass() const {
        for (const auto& c : criteria)
            if (!c.pass) return false;
        return true;
    }

    void add_meta(std::string key, std::string value) {
        meta.emplace_back(std::move(key), std::move(value));
    }
};

inline void write_report_csv(const Report& r, std::ostream& os) {
    os << "eps,statistic,mean,se,n\n";
    for (const auto& row : r.rows)
        os << format_full(row.eps) << ',' << row.statistic << ',' << format_full(row.mean) << ','
           << format_full(row.se) << ',' << row.n << '\n';
}

inline void write_report_csv(const Report& r, const std::string& filename) {
    std::ofstream os(filename);
    if (!os) throw std::runtime_error("cannot open " + filename);
    write_report_csv(r, os);
}

inline nlohmann::ordered_json report_to_json(const Report& r) {
    nlohmann::ordered_json j;
    j["name"] = r.name;
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.meta) meta[k] = v;
    j["meta"] = std::move(meta);
    j["criteria"] = nlohmann::ordered_json::array();
    for (const auto& c : r.criteria) {
        nlohmann::ordered_json jc;
        jc["name"] = c.name;
        jc["pass"] = c.pass;
        jc["value"] = c.value;
        jc["threshold"] = c.threshold;
        if (!c.detail.empty()) jc["detail"] = c.detail;
        j["criteria"].push_back(std::move(jc));
    }
    j["all_pass"] = r.all_pass();
    return j;
}

}  // namespace roughmag
