#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "c2ae/matrix.hpp"

namespace c2ae {

struct ConfusionCounts {
    std::size_t n_labels = 0;
    std::vector<std::uint64_t> tp, fp, fn, tn;  // per label
};

// pred and truth are binary (0/1) n_labels x n_instances matrices
ConfusionCounts confusion(const Matrix& pred, const Matrix& truth);

// Per-label precision/recall/F1 plus their unweighted means (c_*) and the
// pooled-count aggregates (o_*). Any ratio with a zero denominator is 0.
struct MetricsReport {
    double c_p = 0, c_r = 0, c_f1 = 0;
    double o_p = 0, o_r = 0, o_f1 = 0;
    std::vector<double> precision, recall, f1;
};

MetricsReport report(const ConfusionCounts& counts);

double micro_f1(const Matrix& pred, const Matrix& truth);

std::string format_report(const MetricsReport& r);
void save_report(const MetricsReport& r, const std::string& path);
MetricsReport load_report(const std::string& path);

}  // namespace c2ae
