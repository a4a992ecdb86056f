#include "c2ae/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "c2ae/rng.hpp"

namespace c2ae {

namespace {

// sub-stream tags for deriving independent seeds from the config seed
enum : std::uint64_t { kSeedSplit = 1, kSeedFx = 2, kSeedFe = 3, kSeedFd = 4, kSeedBatch = 5 };

// micro-F1 at a threshold, counting known labels only (missing entries in
// the validation split are left out of the confusion counts)
double known_micro_f1_at(const Matrix& scores, double threshold, const MultiLabelDataset& ds) {
    std::uint64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t j = 0; j < ds.n_labels; ++j) {
        for (std::size_t i = 0; i < ds.n_instances; ++i) {
            const LabelState s = ds.label(j, i);
            if (s == LabelState::Missing) continue;
            const bool pred = scores(j, i) > threshold;
            const bool truth = s == LabelState::Pos;
            if (pred && truth) ++tp;
            else if (pred) ++fp;
            else if (truth) ++fn;
        }
    }
    const double p = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double r = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
}

struct Calibration {
    double threshold = 0.0;
    double micro_f1 = 0.0;
};

Calibration calibrate_with_f1(const Model& model, const MultiLabelDataset& val) {
    if (val.n_instances == 0)
        throw std::invalid_argument("calibrate_threshold: empty validation set");
    const Matrix scores = predict_scores(model, val.features);
    double lo = scores.data[0], hi = scores.data[0];
    for (double v : scores.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    Calibration best;
    best.threshold = lo;
    best.micro_f1 = -1.0;
    for (int c = 0; c <= 100; ++c) {
        const double t = lo + (hi - lo) * static_cast<double>(c) / 100.0;
        const double f1 = known_micro_f1_at(scores, t, val);
        if (f1 > best.micro_f1) best = {t, f1};
    }
    return best;
}

void check_label_batch(const Model& model, const Matrix& encoder_input, const LabelSets& sets,
                       std::size_t n) {
    if (encoder_input.rows != model.n_labels() || encoder_input.cols != n)
        throw std::invalid_argument("objective: label batch shape mismatch");
    if (sets.n_labels != model.n_labels() || sets.n_instances() != n)
        throw std::invalid_argument("objective: label sets shape mismatch");
}

ObjectiveValue objective_impl(const Model& model, const Matrix& features,
                              const Matrix& encoder_input, const LabelSets& sets,
                              ObjectiveGrads* grads) {
    if (features.rows != model.n_features())
        throw std::invalid_argument("objective: feature batch rows do not match model");
    check_label_batch(model, encoder_input, sets, features.cols);

    ObjectiveValue v;
    if (model.loss_mode == LossMode::C2ae) {
        ForwardCache cache_x, cache_e, cache_d;
        const Matrix cx = forward(model.feature_net, features, grads ? &cache_x : nullptr);
        const Matrix cy = forward(model.encoder, encoder_input, grads ? &cache_e : nullptr);
        const Matrix scores = forward(model.decoder, cy, grads ? &cache_d : nullptr);

        v.phi = latent_loss(cx, cy, model.lambda, model.normalize_penalty);
        v.gamma = output_loss(scores, sets);
        v.total = v.phi + model.alpha * v.gamma;
        if (grads) {
            Matrix d_cx, d_cy;
            latent_grads(cx, cy, model.lambda, d_cx, d_cy, model.normalize_penalty);
            const Matrix d_scores = model.alpha * output_grad(scores, sets);
            grads->feature_net = backward(model.feature_net, cache_x, d_cx);
            Matrix d_cy_gamma;
            grads->decoder = backward(model.decoder, cache_d, d_scores, &d_cy_gamma);
            d_cy += d_cy_gamma;
            grads->encoder = backward(model.encoder, cache_e, d_cy);
        }
    } else {
        ForwardCache cache_x, cache_d;
        const Matrix latent = forward(model.feature_net, features, grads ? &cache_x : nullptr);
        const Matrix scores = forward(model.decoder, latent, grads ? &cache_d : nullptr);
        Matrix d_scores;
        if (model.loss_mode == LossMode::Bpmll) {
            v.gamma = output_loss(scores, sets);
            if (grads) d_scores = output_grad(scores, sets);
        } else {
            v.gamma = bce_loss(scores, sets, grads ? &d_scores : nullptr);
        }
        v.total = v.gamma;
        if (grads) {
            Matrix d_latent;
            grads->decoder = backward(model.decoder, cache_d, d_scores, &d_latent);
            grads->feature_net = backward(model.feature_net, cache_x, d_latent);
            grads->encoder = zero_grads_like(model.encoder);
        }
    }
    return v;
}

std::pair<Model, TrainHistory> train_single(const MultiLabelDataset& ds, const TrainConfig& cfg) {
    if (ds.n_instances == 0) throw std::invalid_argument("train: empty dataset");
    if (ds.n_labels == 0) throw std::invalid_argument("train: dataset has zero labels");
    if (ds.n_features == 0) throw std::invalid_argument("train: dataset has zero features");
    if (cfg.batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");
    if (cfg.epochs == 0) throw std::invalid_argument("train: epochs must be >= 1");

    const std::size_t l = cfg.latent_dim == 0 ? ds.n_labels : cfg.latent_dim;
    if (cfg.batch_size < l)
        std::fprintf(stderr,
                     "warning: batch_size %zu below latent dimension %zu; the whitening "
                     "penalty cannot reach zero\n",
                     cfg.batch_size, l);

    auto [train_ds, val_ds] = split(ds, cfg.val_fraction, mix_seed(cfg.seed, kSeedSplit));

    Model model;
    model.alpha = cfg.alpha;
    model.lambda = cfg.lambda;
    model.latent_dim = l;
    model.loss_mode = cfg.loss_mode;
    model.normalize_penalty = cfg.normalize_penalty;
    model.zero_mean_inputs = cfg.missing_mode || cfg.zero_mean_inputs;

    const ActivationSpec act{Activation::LeakyRelu, cfg.leaky_slope};
    std::vector<std::size_t> fx_dims;
    fx_dims.push_back(ds.n_features);
    fx_dims.insert(fx_dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
    fx_dims.push_back(l);
    model.feature_net = init_network(fx_dims, act, mix_seed(cfg.seed, kSeedFx));
    model.encoder = init_network({ds.n_labels, l}, act, mix_seed(cfg.seed, kSeedFe));
    model.decoder = init_network({l, ds.n_labels}, act, mix_seed(cfg.seed, kSeedFd));

    OptimizerConfig opt_cfg;
    opt_cfg.algo = cfg.optimizer;
    opt_cfg.learning_rate = cfg.learning_rate;
    opt_cfg.momentum = cfg.momentum;
    Optimizer opt_fx(model.feature_net, opt_cfg);
    Optimizer opt_fe(model.encoder, opt_cfg);
    Optimizer opt_fd(model.decoder, opt_cfg);

    if (ds.missing_count() > 0 && !model.zero_mean_inputs)
        std::fprintf(stderr,
                     "warning: dataset contains missing labels but missing_mode is off; "
                     "encoder inputs stay raw 0/1\n");

    BatchPlan plan(train_ds.n_instances, cfg.batch_size, mix_seed(cfg.seed, kSeedBatch));
    TrainHistory history;
    double best_f1 = -1.0;
    std::size_t stale = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        EpochStats stats;
        std::size_t n_batches = 0;
        for (const auto& idx : plan.next_epoch()) {
            const Batch batch = gather_batch(train_ds, idx, model.zero_mean_inputs);
            ObjectiveGrads grads;
            const ObjectiveValue v =
                objective_and_grads(model, batch.features, batch.encoder_input, batch.sets, grads);
            if (!std::isfinite(v.total))
                throw TrainingError("training diverged: non-finite loss at epoch " +
                                    std::to_string(epoch));
            opt_fx.step(model.feature_net, grads.feature_net);
            opt_fd.step(model.decoder, grads.decoder);
            if (model.loss_mode == LossMode::C2ae) opt_fe.step(model.encoder, grads.encoder);
            stats.mean_phi += v.phi;
            stats.mean_gamma += v.gamma;
            stats.mean_total += v.total;
            ++n_batches;
        }
        stats.mean_phi /= static_cast<double>(n_batches);
        stats.mean_gamma /= static_cast<double>(n_batches);
        stats.mean_total /= static_cast<double>(n_batches);

        const Calibration cal = calibrate_with_f1(model, val_ds);
        model.threshold = cal.threshold;
        model.calibrated = true;
        stats.val_micro_f1 = cal.micro_f1;
        stats.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        history.epochs.push_back(stats);

        if (cfg.verbose)
            std::fprintf(stderr, "epoch %zu: phi %.6g gamma %.6g total %.6g val_f1 %.4f\n",
                         epoch, stats.mean_phi, stats.mean_gamma, stats.mean_total,
                         stats.val_micro_f1);

        if (cal.micro_f1 > best_f1) {
            best_f1 = cal.micro_f1;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    return {std::move(model), std::move(history)};
}

}  // namespace

std::string loss_mode_name(LossMode m) {
    switch (m) {
        case LossMode::C2ae: return "c2ae";
        case LossMode::Bpmll: return "bpmll";
        case LossMode::Bce: return "bce";
    }
    return "c2ae";
}

LossMode parse_loss_mode(const std::string& s) {
    if (s == "c2ae") return LossMode::C2ae;
    if (s == "bpmll") return LossMode::Bpmll;
    if (s == "bce") return LossMode::Bce;
    throw std::invalid_argument("unknown loss mode '" + s + "' (expected c2ae, bpmll, or bce)");
}

std::string format_history(const TrainHistory& h) {
    std::string out = "c2ae-history 1\n";
    out += "epochs " + std::to_string(h.epochs.size()) + "\n";
    for (std::size_t e = 0; e < h.epochs.size(); ++e) {
        const EpochStats& s = h.epochs[e];
        out += "epoch " + std::to_string(e) + " phi " + fmt_g17(s.mean_phi) + " gamma " +
               fmt_g17(s.mean_gamma) + " total " + fmt_g17(s.mean_total) + " val_micro_f1 " +
               fmt_g17(s.val_micro_f1) + " wall_s " + fmt_g17(s.wall_seconds) + "\n";
    }
    return out;
}

ObjectiveValue objective(const Model& model, const Matrix& features,
                         const Matrix& encoder_input, const LabelSets& sets) {
    return objective_impl(model, features, encoder_input, sets, nullptr);
}

ObjectiveValue objective_and_grads(const Model& model, const Matrix& features,
                                   const Matrix& encoder_input, const LabelSets& sets,
                                   ObjectiveGrads& grads) {
    return objective_impl(model, features, encoder_input, sets, &grads);
}

std::pair<Model, TrainHistory> train(const MultiLabelDataset& ds, const TrainConfig& cfg) {
    if (!cfg.alpha_sweep) return train_single(ds, cfg);
    if (cfg.alpha_grid.empty())
        throw std::invalid_argument("train: alpha sweep requested with an empty grid");

    std::pair<Model, TrainHistory> best;
    double best_f1 = -1.0;
    for (double alpha : cfg.alpha_grid) {
        TrainConfig sub = cfg;
        sub.alpha = alpha;
        sub.alpha_sweep = false;
        auto candidate = train_single(ds, sub);
        const double f1 = candidate.second.epochs.back().val_micro_f1;
        if (f1 > best_f1) {
            best_f1 = f1;
            best = std::move(candidate);
        }
    }
    return best;
}

Matrix predict_scores(const Model& model, const Matrix& features) {
    if (features.rows != model.n_features())
        throw std::invalid_argument("predict: feature rows do not match model (expected " +
                                    std::to_string(model.n_features()) + ", got " +
                                    std::to_string(features.rows) + ")");
    return forward(model.decoder, forward(model.feature_net, features));
}

Matrix predict_labels_at(const Model& model, const Matrix& features, double threshold) {
    Matrix scores = predict_scores(model, features);
    for (double& v : scores.data) v = v > threshold ? 1.0 : 0.0;
    return scores;
}

Matrix predict_labels(const Model& model, const Matrix& features) {
    if (!model.calibrated)
        throw std::logic_error("predict_labels: model has no calibrated threshold");
    return predict_labels_at(model, features, model.threshold);
}

double calibrate_threshold(const Model& model, const MultiLabelDataset& val) {
    return calibrate_with_f1(model, val).threshold;
}

Matrix embed_labels(const Model& model) {
    if (model.loss_mode != LossMode::C2ae)
        throw std::logic_error("embed_labels: encoder is unused in " +
                               loss_mode_name(model.loss_mode) + " mode");
    return forward(model.encoder, Matrix::identity(model.n_labels()));
}

std::vector<std::pair<std::size_t, double>> nearest_label_neighbors(const Model& model,
                                                                    std::size_t label_index,
                                                                    std::size_t k) {
    const std::size_t m = model.n_labels();
    if (label_index >= m)
        throw std::out_of_range("nearest_label_neighbors: label index out of range");
    if (k > m - 1)
        throw std::invalid_argument("nearest_label_neighbors: k exceeds label count - 1");

    const Matrix emb = embed_labels(model);
    std::vector<std::pair<std::size_t, double>> neighbors;
    neighbors.reserve(m - 1);
    for (std::size_t j = 0; j < m; ++j) {
        if (j == label_index) continue;
        double d2 = 0.0;
        for (std::size_t r = 0; r < emb.rows; ++r) {
            const double diff = emb(r, j) - emb(r, label_index);
            d2 += diff * diff;
        }
        neighbors.emplace_back(j, std::sqrt(d2));
    }
    std::sort(neighbors.begin(), neighbors.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second < b.second : a.first < b.first;
    });
    neighbors.resize(k);
    return neighbors;
}

namespace {

void format_network(std::string& out, const char* name, const Network& net) {
    out += "network ";
    out += name;
    out += ' ';
    out += std::to_string(net.layers.size());
    out += '\n';
    for (const auto& layer : net.layers) {
        out += "layer " + std::to_string(layer.out_dim()) + " " + std::to_string(layer.in_dim()) +
               " " + (layer.activation == Activation::LeakyRelu ? "leaky_relu" : "linear") + " " +
               fmt_g17(layer.slope) + "\n";
        for (std::size_t i = 0; i < layer.out_dim(); ++i) {
            for (std::size_t j = 0; j < layer.in_dim(); ++j) {
                if (j) out += ' ';
                out += fmt_g17(layer.weight(i, j));
            }
            out += '\n';
        }
        out += "bias";
        for (double b : layer.bias) {
            out += ' ';
            out += fmt_g17(b);
        }
        out += '\n';
    }
}

Network parse_network(std::istream& in, const std::string& expected_name) {
    std::string word, name;
    std::size_t n_layers = 0;
    if (!(in >> word >> name >> n_layers) || word != "network" || name != expected_name)
        throw std::runtime_error("model file: expected 'network " + expected_name + "'");
    Network net;
    for (std::size_t kk = 0; kk < n_layers; ++kk) {
        std::size_t out_dim = 0, in_dim = 0;
        std::string act;
        double slope = 0.0;
        if (!(in >> word >> out_dim >> in_dim >> act >> slope) || word != "layer")
            throw std::runtime_error("model file: malformed layer header");
        DenseLayer layer;
        layer.weight = Matrix(out_dim, in_dim);
        layer.bias.assign(out_dim, 0.0);
        if (act == "leaky_relu") layer.activation = Activation::LeakyRelu;
        else if (act == "linear") layer.activation = Activation::Linear;
        else throw std::runtime_error("model file: unknown activation '" + act + "'");
        layer.slope = slope;
        for (double& w : layer.weight.data)
            if (!(in >> w)) throw std::runtime_error("model file: truncated weights");
        if (!(in >> word) || word != "bias")
            throw std::runtime_error("model file: expected bias row");
        for (double& b : layer.bias)
            if (!(in >> b)) throw std::runtime_error("model file: truncated biases");
        if (!net.layers.empty() && net.layers.back().out_dim() != in_dim)
            throw std::runtime_error("model file: layer dimensions do not chain");
        net.layers.push_back(std::move(layer));
    }
    if (net.layers.empty()) throw std::runtime_error("model file: network with no layers");
    return net;
}

}  // namespace

std::string format_model(const Model& model) {
    std::string out = "c2ae-model 1\n";
    out += "loss_mode " + loss_mode_name(model.loss_mode) + "\n";
    out += "n_features " + std::to_string(model.n_features()) + "\n";
    out += "n_labels " + std::to_string(model.n_labels()) + "\n";
    out += "latent_dim " + std::to_string(model.latent_dim) + "\n";
    out += "alpha " + fmt_g17(model.alpha) + "\n";
    out += "lambda " + fmt_g17(model.lambda) + "\n";
    out += "normalize_penalty " + std::string(model.normalize_penalty ? "1" : "0") + "\n";
    out += "zero_mean_inputs " + std::string(model.zero_mean_inputs ? "1" : "0") + "\n";
    out += "threshold " + (model.calibrated ? fmt_g17(model.threshold) : std::string("none")) + "\n";
    format_network(out, "feature", model.feature_net);
    format_network(out, "encoder", model.encoder);
    format_network(out, "decoder", model.decoder);
    return out;
}

void save_model(const Model& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << format_model(model);
    if (!out) throw std::runtime_error("failed while writing model file: " + path);
}

Model load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "c2ae-model")
        throw std::runtime_error(path + ": not a model file");
    if (version != 1)
        throw std::runtime_error(path + ": unknown model format version " +
                                 std::to_string(version));

    Model model;
    std::string key, value;
    auto expect_key = [&](const char* want) {
        if (!(in >> key) || key != want)
            throw std::runtime_error(path + ": expected key '" + want + "'");
    };
    expect_key("loss_mode");
    in >> value;
    model.loss_mode = parse_loss_mode(value);
    std::size_t n_features = 0, n_labels = 0;
    expect_key("n_features");
    in >> n_features;
    expect_key("n_labels");
    in >> n_labels;
    expect_key("latent_dim");
    in >> model.latent_dim;
    expect_key("alpha");
    in >> model.alpha;
    expect_key("lambda");
    in >> model.lambda;
    expect_key("normalize_penalty");
    in >> model.normalize_penalty;
    expect_key("zero_mean_inputs");
    in >> model.zero_mean_inputs;
    expect_key("threshold");
    in >> value;
    if (value == "none") {
        model.calibrated = false;
    } else {
        model.calibrated = true;
        model.threshold = std::strtod(value.c_str(), nullptr);
    }
    if (!in) throw std::runtime_error(path + ": malformed model header");

    model.feature_net = parse_network(in, "feature");
    model.encoder = parse_network(in, "encoder");
    model.decoder = parse_network(in, "decoder");

    if (model.feature_net.in_dim() != n_features || model.decoder.out_dim() != n_labels ||
        model.feature_net.out_dim() != model.latent_dim ||
        model.encoder.out_dim() != model.latent_dim ||
        model.decoder.in_dim() != model.latent_dim || model.encoder.in_dim() != n_labels)
        throw std::runtime_error(path + ": network dimensions disagree with header");
    return model;
}

}  // namespace c2ae
