#include "c2ae/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace c2ae {

namespace {

[[noreturn]] void parse_fail(const std::string& path, std::size_t line_no,
                             const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

bool parse_index(const std::string& tok, std::size_t& out) {
    if (tok.empty()) return false;
    for (char c : tok)
        if (c < '0' || c > '9') return false;
    errno = 0;
    out = std::strtoull(tok.c_str(), nullptr, 10);
    return errno == 0;
}

bool parse_real(const std::string& tok, double& out) {
    if (tok.empty()) return false;
    char* end = nullptr;
    out = std::strtod(tok.c_str(), &end);
    return end == tok.c_str() + tok.size();
}

}  // namespace

Matrix MultiLabelDataset::binary_labels() const {
    Matrix y(n_labels, n_instances);
    for (std::size_t k = 0; k < labels.size(); ++k)
        y.data[k] = labels[k] == LabelState::Pos ? 1.0 : 0.0;
    return y;
}

LabelSets MultiLabelDataset::label_sets() const {
    std::vector<std::size_t> all(n_instances);
    std::iota(all.begin(), all.end(), 0);
    return label_sets(all);
}

LabelSets MultiLabelDataset::label_sets(const std::vector<std::size_t>& instance_idx) const {
    LabelSets sets;
    sets.n_labels = n_labels;
    sets.pos.resize(instance_idx.size());
    sets.neg.resize(instance_idx.size());
    sets.missing.resize(instance_idx.size());
    for (std::size_t k = 0; k < instance_idx.size(); ++k) {
        const std::size_t i = instance_idx[k];
        for (std::size_t j = 0; j < n_labels; ++j) {
            switch (label(j, i)) {
                case LabelState::Pos: sets.pos[k].push_back(j); break;
                case LabelState::Neg: sets.neg[k].push_back(j); break;
                case LabelState::Missing: sets.missing[k].push_back(j); break;
            }
        }
    }
    return sets;
}

std::size_t MultiLabelDataset::missing_count() const {
    std::size_t c = 0;
    for (LabelState s : labels)
        if (s == LabelState::Missing) ++c;
    return c;
}

MultiLabelDataset MultiLabelDataset::subset(const std::vector<std::size_t>& instance_idx) const {
    MultiLabelDataset out;
    out.n_instances = instance_idx.size();
    out.n_features = n_features;
    out.n_labels = n_labels;
    out.label_names = label_names;
    out.features = Matrix(n_features, instance_idx.size());
    out.labels.resize(n_labels * instance_idx.size());
    for (std::size_t k = 0; k < instance_idx.size(); ++k) {
        const std::size_t i = instance_idx[k];
        for (std::size_t r = 0; r < n_features; ++r) out.features(r, k) = features(r, i);
        for (std::size_t j = 0; j < n_labels; ++j) out.label(j, k) = label(j, i);
    }
    return out;
}

bool operator==(const MultiLabelDataset& a, const MultiLabelDataset& b) {
    return a.n_instances == b.n_instances && a.n_features == b.n_features &&
           a.n_labels == b.n_labels && a.features == b.features && a.labels == b.labels &&
           a.label_names == b.label_names;
}

MultiLabelDataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);

    MultiLabelDataset ds;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    std::size_t consumed = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line[0] == '#') continue;
        if (!have_header) {
            std::istringstream hs(line);
            long long n = -1, d = -1, m = -1;
            if (!(hs >> n >> d >> m) || n < 0 || d < 0 || m < 0)
                parse_fail(path, line_no, "expected header 'N d m'");
            std::string rest;
            if (hs >> rest) parse_fail(path, line_no, "trailing content after header");
            ds.n_instances = static_cast<std::size_t>(n);
            ds.n_features = static_cast<std::size_t>(d);
            ds.n_labels = static_cast<std::size_t>(m);
            ds.features = Matrix(ds.n_features, ds.n_instances);
            ds.labels.assign(ds.n_labels * ds.n_instances, LabelState::Neg);
            have_header = true;
            continue;
        }
        if (consumed >= ds.n_instances) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            parse_fail(path, line_no, "extra instance line beyond declared N");
        }
        const std::size_t i = consumed++;

        std::istringstream ls(line);
        std::vector<std::string> toks;
        std::string tok;
        while (ls >> tok) toks.push_back(tok);

        std::size_t feat_start = 0;
        if (!toks.empty() && toks[0].find(':') == std::string::npos) {
            feat_start = 1;
            // comma-separated positive indices, '?' prefix marks missing
            std::stringstream ss(toks[0]);
            std::string item;
            while (std::getline(ss, item, ',')) {
                bool missing = false;
                if (!item.empty() && item[0] == '?') {
                    missing = true;
                    item.erase(0, 1);
                }
                std::size_t j = 0;
                if (!parse_index(item, j))
                    parse_fail(path, line_no, "malformed label token '" + item + "'");
                if (j >= ds.n_labels)
                    parse_fail(path, line_no, "label index " + std::to_string(j) +
                                                  " out of range (m=" + std::to_string(ds.n_labels) + ")");
                if (ds.label(j, i) != LabelState::Neg)
                    parse_fail(path, line_no, "duplicate label index " + std::to_string(j));
                ds.label(j, i) = missing ? LabelState::Missing : LabelState::Pos;
            }
        }

        long long prev = -1;
        for (std::size_t t = feat_start; t < toks.size(); ++t) {
            const std::string& ft = toks[t];
            const std::size_t colon = ft.find(':');
            if (colon == std::string::npos)
                parse_fail(path, line_no, "malformed feature token '" + ft + "'");
            std::size_t idx = 0;
            double value = 0.0;
            if (!parse_index(ft.substr(0, colon), idx))
                parse_fail(path, line_no, "malformed feature index in '" + ft + "'");
            if (!parse_real(ft.substr(colon + 1), value))
                parse_fail(path, line_no, "malformed feature value in '" + ft + "'");
            if (idx >= ds.n_features)
                parse_fail(path, line_no, "feature index " + std::to_string(idx) +
                                              " out of range (d=" + std::to_string(ds.n_features) + ")");
            if (static_cast<long long>(idx) == prev)
                parse_fail(path, line_no, "duplicate feature index " + std::to_string(idx));
            if (static_cast<long long>(idx) < prev)
                parse_fail(path, line_no, "feature indices must be strictly increasing");
            prev = static_cast<long long>(idx);
            ds.features(idx, i) = value;
        }
    }

    if (!have_header) throw std::runtime_error(path + ": missing header line");
    if (consumed < ds.n_instances)
        throw std::runtime_error(path + ": expected " + std::to_string(ds.n_instances) +
                                 " instance lines, found " + std::to_string(consumed));

    for (std::size_t i = 0; i < ds.n_instances; ++i) {
        bool any_known = ds.n_labels == 0;
        for (std::size_t j = 0; j < ds.n_labels && !any_known; ++j)
            any_known = ds.label(j, i) != LabelState::Missing;
        if (!any_known)
            throw std::runtime_error(path + ": instance " + std::to_string(i) +
                                     " has all labels missing");
    }
    return ds;
}

std::string format_dataset(const MultiLabelDataset& ds) {
    std::string out;
    out += std::to_string(ds.n_instances) + " " + std::to_string(ds.n_features) + " " +
           std::to_string(ds.n_labels) + "\n";
    for (std::size_t i = 0; i < ds.n_instances; ++i) {
        std::string line;
        bool first = true;
        for (std::size_t j = 0; j < ds.n_labels; ++j) {
            if (ds.label(j, i) != LabelState::Pos) continue;
            if (!first) line += ',';
            line += std::to_string(j);
            first = false;
        }
        for (std::size_t j = 0; j < ds.n_labels; ++j) {
            if (ds.label(j, i) != LabelState::Missing) continue;
            if (!first) line += ',';
            line += '?';
            line += std::to_string(j);
            first = false;
        }
        for (std::size_t r = 0; r < ds.n_features; ++r) {
            const double v = ds.features(r, i);
            if (v == 0.0) continue;
            if (!line.empty()) line += ' ';
            line += std::to_string(r) + ":" + fmt_g17(v);
        }
        out += line;
        out += '\n';
    }
    return out;
}

void save_dataset(const MultiLabelDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    out << format_dataset(ds);
    if (!out) throw std::runtime_error("failed while writing dataset file: " + path);
}

MultiLabelDataset mask_labels(const MultiLabelDataset& ds, double rate, std::uint64_t seed) {
    if (rate < 0.0 || rate >= 1.0)
        throw std::invalid_argument("mask_labels: rate must be in [0, 1)");
    if (ds.missing_count() != 0)
        throw std::invalid_argument("mask_labels: input already contains missing labels");

    MultiLabelDataset out = ds;
    Rng rng(seed);
    for (std::size_t i = 0; i < ds.n_instances; ++i) {
        std::vector<std::size_t> pos;
        for (std::size_t j = 0; j < ds.n_labels; ++j)
            if (ds.label(j, i) == LabelState::Pos) pos.push_back(j);
        if (pos.empty())
            throw std::invalid_argument("mask_labels: instance " + std::to_string(i) +
                                        " has no positive label");
        const std::size_t keep = pos[rng.uniform_index(pos.size())];
        for (std::size_t j = 0; j < ds.n_labels; ++j) {
            if (j == keep) continue;
            if (rng.uniform() < rate) out.label(j, i) = LabelState::Missing;
        }
    }
    return out;
}

Matrix preprocess_missing_inputs(const MultiLabelDataset& ds) {
    Matrix y(ds.n_labels, ds.n_instances);
    for (std::size_t i = 0; i < ds.n_instances; ++i) {
        std::size_t npos = 0, nneg = 0;
        for (std::size_t j = 0; j < ds.n_labels; ++j) {
            if (ds.label(j, i) == LabelState::Pos) ++npos;
            else if (ds.label(j, i) == LabelState::Neg) ++nneg;
        }
        const double neg_value =
            (nneg == 0 || npos == 0)
                ? 0.0
                : -(static_cast<double>(npos) / static_cast<double>(nneg));
        for (std::size_t j = 0; j < ds.n_labels; ++j) {
            switch (ds.label(j, i)) {
                case LabelState::Pos: y(j, i) = 1.0; break;
                case LabelState::Neg: y(j, i) = neg_value; break;
                case LabelState::Missing: y(j, i) = 0.0; break;
            }
        }
    }
    return y;
}

std::pair<MultiLabelDataset, MultiLabelDataset> split(const MultiLabelDataset& ds,
                                                      double val_fraction,
                                                      std::uint64_t seed) {
    if (val_fraction <= 0.0 || val_fraction >= 1.0)
        throw std::invalid_argument("split: val_fraction must be in (0, 1)");
    if (ds.n_instances < 2) throw std::invalid_argument("split: need at least 2 instances");

    const std::size_t n_val = static_cast<std::size_t>(
        std::llround(val_fraction * static_cast<double>(ds.n_instances)));
    if (n_val == 0 || n_val == ds.n_instances)
        throw std::invalid_argument("split: fraction leaves one side empty");

    std::vector<std::size_t> order(ds.n_instances);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
    std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    return {ds.subset(train_idx), ds.subset(val_idx)};
}

BatchPlan::BatchPlan(std::size_t n, std::size_t batch_size, std::uint64_t seed)
    : n_(n), batch_size_(batch_size), rng_(seed) {
    if (batch_size_ == 0) throw std::invalid_argument("batch plan: batch_size must be >= 1");
}

std::vector<std::vector<std::size_t>> BatchPlan::next_epoch() {
    std::vector<std::size_t> order(n_);
    std::iota(order.begin(), order.end(), 0);
    rng_.shuffle(order);

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n_; start += batch_size_) {
        const std::size_t end = std::min(n_, start + batch_size_);
        batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    return batches;
}

Batch gather_batch(const MultiLabelDataset& ds, const std::vector<std::size_t>& idx,
                   bool zero_mean_inputs) {
    Batch b;
    b.features = Matrix(ds.n_features, idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k)
        for (std::size_t r = 0; r < ds.n_features; ++r)
            b.features(r, k) = ds.features(r, idx[k]);
    b.sets = ds.label_sets(idx);

    b.encoder_input = Matrix(ds.n_labels, idx.size());
    if (zero_mean_inputs) {
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const std::size_t npos = b.sets.pos[k].size();
            const std::size_t nneg = b.sets.neg[k].size();
            const double neg_value =
                (nneg == 0 || npos == 0)
                    ? 0.0
                    : -(static_cast<double>(npos) / static_cast<double>(nneg));
            for (std::size_t j : b.sets.pos[k]) b.encoder_input(j, k) = 1.0;
            for (std::size_t j : b.sets.neg[k]) b.encoder_input(j, k) = neg_value;
        }
    } else {
        for (std::size_t k = 0; k < idx.size(); ++k)
            for (std::size_t j : b.sets.pos[k]) b.encoder_input(j, k) = 1.0;
    }
    return b;
}

MultiLabelDataset synth_correlated(std::size_t n, std::size_t d, std::size_t m,
                                   std::uint64_t seed) {
    if (n == 0 || d == 0 || m == 0)
        throw std::invalid_argument("synth_correlated: dimensions must be >= 1");

    const std::size_t k = std::max<std::size_t>(2, m / 2);
    Rng rng(seed);

    Matrix mixing(d, k);
    for (double& v : mixing.data) v = rng.normal();
    Matrix label_w(m, k);
    for (double& v : label_w.data) v = rng.normal();
    std::vector<double> target_rate(m);
    for (double& r : target_rate) r = rng.uniform(0.2, 0.5);

    auto draw_instance = [&](std::vector<double>& z, std::vector<double>& noise) {
        for (double& v : z) v = rng.normal();
        for (double& v : noise) v = rng.normal();
    };

    std::vector<std::vector<double>> zs(n, std::vector<double>(k));
    std::vector<std::vector<double>> noises(n, std::vector<double>(d));
    for (std::size_t i = 0; i < n; ++i) draw_instance(zs[i], noises[i]);

    // per-label offset from the empirical quantile of the latent projections,
    // so realized positive rates match the drawn targets
    std::vector<double> offset(m);
    std::vector<double> proj(n);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t f = 0; f < k; ++f) s += label_w(j, f) * zs[i][f];
            proj[i] = s;
        }
        std::vector<double> sorted = proj;
        std::sort(sorted.begin(), sorted.end());
        std::size_t n_pos = static_cast<std::size_t>(
            std::llround(target_rate[j] * static_cast<double>(n)));
        n_pos = std::min(std::max<std::size_t>(n_pos, 1), n);
        // threshold between the order statistics so s + offset > 0 holds for
        // (about) the n_pos largest projections
        if (n_pos == n)
            offset[j] = -sorted[0] + 1.0;
        else
            offset[j] = -0.5 * (sorted[n - n_pos - 1] + sorted[n - n_pos]);
    }

    auto labels_of = [&](const std::vector<double>& z, std::vector<LabelState>& out) {
        bool any_pos = false;
        for (std::size_t j = 0; j < m; ++j) {
            double s = offset[j];
            for (std::size_t f = 0; f < k; ++f) s += label_w(j, f) * z[f];
            out[j] = s > 0.0 ? LabelState::Pos : LabelState::Neg;
            any_pos = any_pos || s > 0.0;
        }
        return any_pos;
    };

    MultiLabelDataset ds;
    ds.n_instances = n;
    ds.n_features = d;
    ds.n_labels = m;
    ds.features = Matrix(d, n);
    ds.labels.assign(m * n, LabelState::Neg);

    std::vector<LabelState> row(m);
    for (std::size_t i = 0; i < n; ++i) {
        int budget = 1000;
        while (!labels_of(zs[i], row)) {
            if (--budget == 0)
                throw std::runtime_error("synth_correlated: retry budget exhausted");
            draw_instance(zs[i], noises[i]);
        }
        for (std::size_t r = 0; r < d; ++r) {
            double s = 0.0;
            for (std::size_t f = 0; f < k; ++f) s += mixing(r, f) * zs[i][f];
            ds.features(r, i) = s + 0.1 * noises[i][r];
        }
        for (std::size_t j = 0; j < m; ++j) ds.label(j, i) = row[j];
    }
    return ds;
}

}  // namespace c2ae
