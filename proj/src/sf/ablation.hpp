#pragma once

#include <string>
#include <vector>

#include "sf/config.hpp"
#include "sf/metrics.hpp"

namespace sf {

struct AblationRow {
    std::string variant;
    MetricSet metrics;
};

struct AblationReport {
    std::string suite;
    std::vector<AblationRow> rows;
    bool pass = false;
    std::string verdict;

    std::string to_markdown() const;
    std::string to_csv() const;
};

// Suites: spp-on-off (ScaffNet with vs without SPP), density-sweep (one
// trained model evaluated at 0.5/0.15/0.05% input density), output-head
// (alpha/beta composition vs direct map) — each with a pass/fail verdict on
// the expected ordering.
AblationReport run_ablation(const std::string& suite, const RunConfig& base,
                            const std::string& out_dir);

}  // namespace sf
