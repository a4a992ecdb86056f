#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "c2ae/losses.hpp"
#include "c2ae/matrix.hpp"
#include "c2ae/rng.hpp"

namespace c2ae {

enum class LabelState : std::int8_t { Neg = 0, Pos = 1, Missing = 2 };

// Features plus a ternary label matrix. The ternary labels are the single
// source of truth; binary views and LabelSets are derived on demand.
struct MultiLabelDataset {
    Matrix features;                     // d x N
    std::vector<LabelState> labels;      // m x N, row-major like Matrix
    std::size_t n_instances = 0;
    std::size_t n_features = 0;
    std::size_t n_labels = 0;
    std::vector<std::string> label_names;  // optional; empty when unnamed

    LabelState label(std::size_t j, std::size_t i) const {
        return labels[j * n_instances + i];
    }
    LabelState& label(std::size_t j, std::size_t i) {
        return labels[j * n_instances + i];
    }

    Matrix binary_labels() const;  // pos -> 1, neg/missing -> 0
    LabelSets label_sets() const;
    LabelSets label_sets(const std::vector<std::size_t>& instance_idx) const;
    std::size_t missing_count() const;
    MultiLabelDataset subset(const std::vector<std::size_t>& instance_idx) const;
};

bool operator==(const MultiLabelDataset& a, const MultiLabelDataset& b);

// Text format: header "N d m", then one line per instance
// "LABELS index:value index:value ...". LABELS is a comma-separated list of
// 0-based positive label indices, "?idx" marks a missing label, an empty
// list means all-negative. Feature indices are 0-based, strictly increasing.
// '#' starts a comment line.
MultiLabelDataset load_dataset(const std::string& path);
void save_dataset(const MultiLabelDataset& ds, const std::string& path);
std::string format_dataset(const MultiLabelDataset& ds);

// Each known label independently becomes missing with probability rate,
// except one uniformly chosen positive per instance that is never masked.
// Input must be fully labeled with at least one positive per instance.
MultiLabelDataset mask_labels(const MultiLabelDataset& ds, double rate, std::uint64_t seed);

// Encoder input for data with missing labels: pos -> 1, missing -> 0,
// neg -> -|pos_i|/|neg_i|, which zero-centers each instance's known labels.
Matrix preprocess_missing_inputs(const MultiLabelDataset& ds);

// Deterministic disjoint split; val gets round(val_fraction * N) instances.
std::pair<MultiLabelDataset, MultiLabelDataset> split(const MultiLabelDataset& ds,
                                                      double val_fraction,
                                                      std::uint64_t seed);

// Mini-batch index plan: a fresh seeded permutation every epoch, sliced into
// batch_size runs with the short remainder kept.
class BatchPlan {
public:
    BatchPlan(std::size_t n, std::size_t batch_size, std::uint64_t seed);
    std::vector<std::vector<std::size_t>> next_epoch();
    std::size_t batch_size() const { return batch_size_; }

private:
    std::size_t n_;
    std::size_t batch_size_;
    Rng rng_;
};

struct Batch {
    Matrix features;       // d x b
    Matrix encoder_input;  // m x b: raw 0/1 labels, or the zero-mean encoding
    LabelSets sets;
};

Batch gather_batch(const MultiLabelDataset& ds, const std::vector<std::size_t>& idx,
                   bool zero_mean_inputs);

// Synthetic set with correlated labels: shared latent factors drive both the
// features and the label thresholds, every instance keeps at least one
// positive label, and positive rates land in roughly [0.2, 0.5].
MultiLabelDataset synth_correlated(std::size_t n, std::size_t d, std::size_t m,
                                   std::uint64_t seed);

}  // namespace c2ae
