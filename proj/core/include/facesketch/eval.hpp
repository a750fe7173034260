#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "facesketch/image.hpp"

namespace facesketch {

// Structural similarity on the grayscale conversions of two equal-shape
// images: 11x11 Gaussian window (sigma 1.5), C1=(0.01)^2 and C2=(0.03)^2 on
// the unit dynamic range, averaged over valid (fully covered) windows.
double ssim(const RasterImage& a, const RasterImage& b);

struct MetricRecord {
    std::string pair_id;
    int budget = 0;
    double ssim = 0.0;
    double runtime_s = 0.0;
};

struct BudgetSummary {
    int budget = 0;
    double mean_ssim = 0.0;
    size_t count = 0;
};

struct AggregateTable {
    std::vector<BudgetSummary> per_budget; // ascending budget
    double spread = 0.0;                   // max - min of per-budget means
};

// Per-budget means. Empty input or duplicate (pair_id, budget) keys are
// validation errors.
AggregateTable aggregate(const std::vector<MetricRecord>& records);

// Schema: pair_id,budget,ssim,runtime_s
void write_metrics_csv(std::ostream& out, const std::vector<MetricRecord>& records);

std::string format_table(const AggregateTable& table);

} // namespace facesketch
