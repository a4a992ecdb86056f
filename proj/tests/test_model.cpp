#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "c2ae/dataset.hpp"
#include "c2ae/gradcheck.hpp"
#include "c2ae/metrics.hpp"
#include "c2ae/model.hpp"
#include "c2ae/rng.hpp"

using namespace c2ae;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double range = 1.0) {
    Matrix m(r, c);
    for (double& v : m.data) v = rng.uniform(-range, range);
    return m;
}

Model tiny_model(std::uint64_t seed, std::size_t d = 4, std::size_t m = 5, std::size_t l = 3) {
    Model model;
    model.latent_dim = l;
    const ActivationSpec act{Activation::LeakyRelu, 0.01};
    model.feature_net = init_network({d, 6, l}, act, mix_seed(seed, 1));
    model.encoder = init_network({m, l}, act, mix_seed(seed, 2));
    model.decoder = init_network({l, m}, act, mix_seed(seed, 3));
    return model;
}

Network single_layer(const Matrix& w) {
    Network net;
    DenseLayer layer;
    layer.weight = w;
    layer.bias.assign(w.rows, 0.0);
    layer.activation = Activation::Linear;
    net.layers.push_back(layer);
    return net;
}

LabelSets sets_from_binary(const Matrix& y01) {
    LabelSets sets;
    sets.n_labels = y01.rows;
    sets.pos.resize(y01.cols);
    sets.neg.resize(y01.cols);
    sets.missing.resize(y01.cols);
    for (std::size_t i = 0; i < y01.cols; ++i)
        for (std::size_t j = 0; j < y01.rows; ++j)
            (y01(j, i) != 0.0 ? sets.pos[i] : sets.neg[i]).push_back(j);
    return sets;
}

TrainConfig fast_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.batch_size = 50;
    cfg.epochs = 6;
    cfg.patience = 6;
    cfg.hidden_dims = {12};
    cfg.latent_dim = 4;
    cfg.seed = seed;
    return cfg;
}

bool same_params(const Network& a, const Network& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t k = 0; k < a.layers.size(); ++k)
        if (a.layers[k].weight != b.layers[k].weight || a.layers[k].bias != b.layers[k].bias)
            return false;
    return true;
}

}  // namespace

TEST_CASE("objective with alpha zero is exactly the latent loss") {
    Rng rng(61);
    Model model = tiny_model(1);
    model.alpha = 0.0;
    const Matrix x = random_matrix(rng, 4, 6);
    Matrix y01(5, 6);
    for (double& v : y01.data) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
    const ObjectiveValue v = objective(model, x, y01, sets_from_binary(y01));
    CHECK(v.total == v.phi);
    CHECK(v.gamma > 0.0);
}

TEST_CASE("objective checkpoint: aligned orthonormal latent and flat scores") {
    // feature net and encoder are identity maps, inputs are I2, decoder is
    // zero: phi = 0 and every instance contributes one unit to gamma
    Model model;
    model.latent_dim = 2;
    model.alpha = 0.7;
    model.lambda = 0.5;
    model.feature_net = single_layer(Matrix::identity(2));
    model.encoder = single_layer(Matrix::identity(2));
    model.decoder = single_layer(Matrix(2, 2));
    const Matrix eye = Matrix::identity(2);
    const ObjectiveValue v = objective(model, eye, eye, sets_from_binary(eye));
    CHECK(v.phi == 0.0);
    CHECK(v.gamma == 2.0);
    CHECK(v.total == doctest::Approx(0.7 * 2.0).epsilon(1e-15));
}

TEST_CASE("objective equals the composition of the two loss terms") {
    Rng rng(62);
    for (int rep = 0; rep < 10; ++rep) {
        Model model = tiny_model(100 + rep);
        model.alpha = rng.uniform(0.1, 5.0);
        const std::size_t n = 1 + rng.uniform_index(6);
        const Matrix x = random_matrix(rng, 4, n);
        Matrix y01(5, n);
        for (double& v : y01.data) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
        const LabelSets sets = sets_from_binary(y01);

        const ObjectiveValue v = objective(model, x, y01, sets);
        const Matrix cx = forward(model.feature_net, x);
        const Matrix cy = forward(model.encoder, y01);
        CHECK(v.phi == latent_loss(cx, cy, model.lambda, model.normalize_penalty));
        CHECK(v.gamma == output_loss(forward(model.decoder, cy), sets));
        CHECK(v.total == doctest::Approx(v.phi + model.alpha * v.gamma).epsilon(1e-15));

        // alpha scales only the ranking portion
        Model doubled = model;
        doubled.alpha = 2.0 * model.alpha;
        const ObjectiveValue v2 = objective(doubled, x, y01, sets);
        CHECK(v2.phi == v.phi);
        CHECK(v2.gamma == v.gamma);
        CHECK(v2.total == doctest::Approx(v.phi + 2.0 * model.alpha * v.gamma).epsilon(1e-15));
    }
}

TEST_CASE("objective rejects mismatched shapes") {
    Model model = tiny_model(2);
    CHECK_THROWS_AS(objective(model, Matrix(3, 2), Matrix(5, 2), LabelSets{}),
                    std::invalid_argument);
}

TEST_CASE("end-to-end objective gradients match finite differences") {
    const GradCheckReport rep = check_objective_grads(808, 20);
    CHECK(rep.cases == 20);
    CHECK(rep.failures == 0);
    CHECK(rep.max_rel_err <= 1e-4);
}

TEST_CASE("baseline-mode gradients match finite differences") {
    Rng rng(67);
    for (LossMode mode : {LossMode::Bpmll, LossMode::Bce}) {
        Model model = tiny_model(mode == LossMode::Bpmll ? 41 : 42);
        model.loss_mode = mode;
        const Matrix x = random_matrix(rng, 4, 3);
        Matrix y01(5, 3);
        for (double& v : y01.data) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
        const LabelSets sets = sets_from_binary(y01);

        ObjectiveGrads grads;
        objective_and_grads(model, x, y01, sets, grads);
        std::vector<double> analytic = flatten_grads(grads.feature_net);
        const std::vector<double> dec = flatten_grads(grads.decoder);
        analytic.insert(analytic.end(), dec.begin(), dec.end());

        std::vector<double> flat = flatten_params(model.feature_net);
        const std::size_t n_fx = flat.size();
        const std::vector<double> fd_flat = flatten_params(model.decoder);
        flat.insert(flat.end(), fd_flat.begin(), fd_flat.end());
        const auto f = [&](const std::vector<double>& v) {
            Model tmp = model;
            unflatten_params(tmp.feature_net, {v.begin(), v.begin() + n_fx});
            unflatten_params(tmp.decoder, {v.begin() + n_fx, v.end()});
            return objective(tmp, x, y01, sets).total;
        };
        const std::vector<double> fd = finite_diff_grad(f, flat, 1e-5);
        for (std::size_t i = 0; i < analytic.size(); ++i)
            CHECK(rel_error(analytic[i], fd[i], 1e-3) <= 1e-4);
    }
}

TEST_CASE("baseline modes share the losses-module code paths") {
    Rng rng(63);
    Model model = tiny_model(3);
    const Matrix x = random_matrix(rng, 4, 5);
    Matrix y01(5, 5);
    for (double& v : y01.data) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
    const LabelSets sets = sets_from_binary(y01);

    model.loss_mode = LossMode::Bpmll;
    reset_loss_counters();
    ObjectiveGrads grads;
    const ObjectiveValue v = objective_and_grads(model, x, y01, sets, grads);
    LossCounters c = loss_counters();
    CHECK(c.output_loss_calls == 1);
    CHECK(c.output_grad_calls == 1);
    CHECK(c.latent_loss_calls == 0);
    CHECK(v.phi == 0.0);
    CHECK(v.total == v.gamma);
    // encoder is unused: gradients are identically zero
    for (const auto& w : grads.encoder.d_weight)
        for (double g : w.data) CHECK(g == 0.0);

    model.loss_mode = LossMode::C2ae;
    reset_loss_counters();
    objective_and_grads(model, x, y01, sets, grads);
    c = loss_counters();
    CHECK(c.output_loss_calls == 1);  // same functions serve both modes
    CHECK(c.output_grad_calls == 1);
    CHECK(c.latent_loss_calls == 1);
    CHECK(c.latent_grad_calls == 1);

    model.loss_mode = LossMode::Bce;
    reset_loss_counters();
    const ObjectiveValue vb = objective_and_grads(model, x, y01, sets, grads);
    c = loss_counters();
    CHECK(c.bce_calls == 1);
    CHECK(c.output_loss_calls == 0);
    CHECK(vb.total == vb.gamma);
    reset_loss_counters();
}

TEST_CASE("training is deterministic for a fixed seed") {
    const MultiLabelDataset ds = synth_correlated(150, 6, 5, 21);
    const TrainConfig cfg = fast_config(9);
    auto [m1, h1] = train(ds, cfg);
    auto [m2, h2] = train(ds, cfg);
    CHECK(same_params(m1.feature_net, m2.feature_net));
    CHECK(same_params(m1.encoder, m2.encoder));
    CHECK(same_params(m1.decoder, m2.decoder));
    CHECK(m1.threshold == m2.threshold);
    REQUIRE(h1.epochs.size() == h2.epochs.size());
    for (std::size_t e = 0; e < h1.epochs.size(); ++e) {
        CHECK(h1.epochs[e].mean_total == h2.epochs[e].mean_total);
        CHECK(h1.epochs[e].val_micro_f1 == h2.epochs[e].val_micro_f1);
    }
    CHECK(format_model(m1) == format_model(m2));
}

TEST_CASE("training rejects degenerate datasets") {
    MultiLabelDataset empty;
    CHECK_THROWS_AS(train(empty, TrainConfig{}), std::invalid_argument);
    MultiLabelDataset no_labels;
    no_labels.n_instances = 5;
    no_labels.n_features = 2;
    no_labels.features = Matrix(2, 5);
    CHECK_THROWS_AS(train(no_labels, TrainConfig{}), std::invalid_argument);
}

TEST_CASE("training halves the objective on the synthetic set") {
    const MultiLabelDataset ds = synth_correlated(300, 8, 6, 33);
    TrainConfig cfg = fast_config(5);
    cfg.epochs = 50;
    cfg.patience = 50;
    cfg.latent_dim = 4;
    auto [model, hist] = train(ds, cfg);
    REQUIRE(hist.epochs.size() == 50);
    CHECK(hist.epochs.back().mean_total <= 0.5 * hist.epochs.front().mean_total);
    CHECK(model.calibrated);
}

TEST_CASE("training diverges loudly instead of silently") {
    const MultiLabelDataset ds = synth_correlated(100, 5, 4, 8);
    TrainConfig cfg = fast_config(2);
    cfg.optimizer = OptAlgo::Sgd;
    cfg.learning_rate = 1e18;
    cfg.epochs = 5;
    CHECK_THROWS_AS(train(ds, cfg), TrainingError);
}

TEST_CASE("training with masked labels stays finite and calibrated") {
    const MultiLabelDataset ds = synth_correlated(200, 6, 5, 13);
    const MultiLabelDataset masked = mask_labels(ds, 0.3, 4);
    TrainConfig cfg = fast_config(3);
    cfg.missing_mode = true;
    auto [model, hist] = train(masked, cfg);
    CHECK(model.calibrated);
    CHECK(model.zero_mean_inputs);
    for (const auto& e : hist.epochs) CHECK(std::isfinite(e.mean_total));
}

TEST_CASE("alpha sweep keeps the candidate with the best validation score") {
    const MultiLabelDataset ds = synth_correlated(150, 6, 5, 55);
    TrainConfig cfg = fast_config(17);
    cfg.alpha_sweep = true;
    cfg.alpha_grid = {0.2, 2.0};
    auto [model, hist] = train(ds, cfg);
    CHECK((model.alpha == 0.2 || model.alpha == 2.0));

    double best = -1.0;
    for (double a : cfg.alpha_grid) {
        TrainConfig sub = cfg;
        sub.alpha_sweep = false;
        sub.alpha = a;
        best = std::max(best, train(ds, sub).second.epochs.back().val_micro_f1);
    }
    CHECK(hist.epochs.back().val_micro_f1 == best);
}

TEST_CASE("predict_scores: zero networks give zero scores, columns are independent") {
    Model model = tiny_model(4);
    for (auto& l : model.feature_net.layers) l.weight = Matrix(l.out_dim(), l.in_dim());
    for (auto& l : model.decoder.layers) l.weight = Matrix(l.out_dim(), l.in_dim());
    Rng rng(64);
    const Matrix x = random_matrix(rng, 4, 3);
    const Matrix s = predict_scores(tiny_model(4), x);
    for (double v : predict_scores(model, x).data) CHECK(v == 0.0);

    // duplicated instance -> identical score columns
    Matrix dup(4, 3);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 3; ++c) dup(r, c) = x(r, 0);
    const Matrix sd = predict_scores(tiny_model(4), dup);
    for (std::size_t r = 0; r < sd.rows; ++r) {
        CHECK(sd(r, 0) == sd(r, 1));
        CHECK(sd(r, 0) == sd(r, 2));
    }
    CHECK(s.rows == 5);
    CHECK_THROWS_AS(predict_scores(model, Matrix(3, 2)), std::invalid_argument);
}

TEST_CASE("predict_scores matches a hand computation on an identity-like model") {
    // feature net: identity 2x2, decoder doubles coordinates
    Model model;
    model.latent_dim = 2;
    model.feature_net = single_layer(Matrix::identity(2));
    Matrix w(2, 2);
    w(0, 0) = 2.0;
    w(1, 1) = 2.0;
    model.decoder = single_layer(w);
    model.encoder = single_layer(Matrix::identity(2));
    Matrix x(2, 2);
    x(0, 0) = 0.5;
    x(1, 0) = -1.0;
    x(0, 1) = 3.0;
    x(1, 1) = 0.25;
    const Matrix s = predict_scores(model, x);
    CHECK(s(0, 0) == 1.0);
    CHECK(s(1, 0) == -2.0);
    CHECK(s(0, 1) == 6.0);
    CHECK(s(1, 1) == 0.5);
}

TEST_CASE("predict_labels thresholds strictly and respects calibration state") {
    Model model = tiny_model(5);
    Rng rng(65);
    const Matrix x = random_matrix(rng, 4, 6);
    CHECK_THROWS_AS(predict_labels(model, x), std::logic_error);

    const Matrix scores = predict_scores(model, x);
    double lo = scores.data[0], hi = scores.data[0];
    for (double v : scores.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double v : predict_labels_at(model, x, lo - 1.0).data) CHECK(v == 1.0);
    for (double v : predict_labels_at(model, x, hi).data) CHECK(v == 0.0);  // strict >

    // elementwise oracle at threshold zero
    const Matrix pred = predict_labels_at(model, x, 0.0);
    for (std::size_t i = 0; i < scores.size(); ++i)
        CHECK(pred.data[i] == (scores.data[i] > 0.0 ? 1.0 : 0.0));

    model.threshold = 0.0;
    model.calibrated = true;
    CHECK(predict_labels(model, x) == pred);
}

TEST_CASE("predictions only see scores through the threshold comparison") {
    // dyadic scores and shift keep the additions exact, so shifting both the
    // decoder bias and the threshold by the same constant changes nothing
    Model model;
    model.latent_dim = 2;
    model.feature_net = single_layer(Matrix::identity(2));
    model.encoder = single_layer(Matrix::identity(2));
    Matrix w(3, 2);
    w(0, 0) = 1.0;
    w(1, 1) = -0.5;
    w(2, 0) = 0.25;
    model.decoder = single_layer(w);

    Rng rng(68);
    Matrix x(2, 9);
    for (double& v : x.data) v = 0.25 * static_cast<double>(rng.uniform_index(17)) - 2.0;

    Model shifted = model;
    const double c = 0.5;
    for (double& b : shifted.decoder.layers[0].bias) b += c;
    for (double t : {-0.75, 0.0, 0.25}) {
        CHECK(predict_labels_at(model, x, t) == predict_labels_at(shifted, x, t + c));
    }
}

TEST_CASE("calibrate_threshold reaches perfect F1 on separable scores") {
    // decoder bias pushes label 0 high and label 1 low regardless of input
    Model model;
    model.latent_dim = 1;
    model.feature_net = single_layer(Matrix(1, 2));
    model.encoder = single_layer(Matrix(1, 2));
    Network dec = single_layer(Matrix(2, 1));
    dec.layers[0].bias = {5.0, -5.0};
    model.decoder = dec;

    MultiLabelDataset val;
    val.n_instances = 4;
    val.n_features = 2;
    val.n_labels = 2;
    val.features = Matrix(2, 4, 0.3);
    val.labels.assign(8, LabelState::Neg);
    for (std::size_t i = 0; i < 4; ++i) val.label(0, i) = LabelState::Pos;

    const double t = calibrate_threshold(model, val);
    model.threshold = t;
    model.calibrated = true;
    CHECK(micro_f1(predict_labels(model, val.features), val.binary_labels()) == 1.0);
}

TEST_CASE("calibrate_threshold tie-break: identical scores return the smallest candidate") {
    Model model;
    model.latent_dim = 1;
    model.feature_net = single_layer(Matrix(1, 3));
    model.encoder = single_layer(Matrix(1, 3));
    Network dec = single_layer(Matrix(3, 1));
    dec.layers[0].bias = {0.25, 0.25, 0.25};
    model.decoder = dec;

    MultiLabelDataset val;
    val.n_instances = 2;
    val.n_features = 3;
    val.n_labels = 3;
    val.features = Matrix(3, 2);
    val.labels.assign(6, LabelState::Neg);
    val.label(0, 0) = LabelState::Pos;
    CHECK(calibrate_threshold(model, val) == 0.25);

    MultiLabelDataset empty = val;
    empty.n_instances = 0;
    empty.features = Matrix(3, 0);
    empty.labels.clear();
    CHECK_THROWS_AS(calibrate_threshold(model, empty), std::invalid_argument);
}

TEST_CASE("calibrate_threshold equals an exhaustive scan of the same grid") {
    const MultiLabelDataset ds = synth_correlated(120, 5, 4, 71);
    Model model = tiny_model(6, 5, 4, 3);
    const double t = calibrate_threshold(model, ds);

    const Matrix scores = predict_scores(model, ds.features);
    double lo = scores.data[0], hi = scores.data[0];
    for (double v : scores.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double best_t = lo, best_f1 = -1.0;
    for (int c = 0; c <= 100; ++c) {
        const double cand = lo + (hi - lo) * c / 100.0;
        Matrix pred = scores;
        for (double& v : pred.data) v = v > cand ? 1.0 : 0.0;
        const double f1 = micro_f1(pred, ds.binary_labels());
        if (f1 > best_f1) {
            best_f1 = f1;
            best_t = cand;
        }
    }
    CHECK(t == best_t);
}

TEST_CASE("embed_labels returns the encoder weight columns for a linear encoder") {
    Model model = tiny_model(7);
    const Matrix emb = embed_labels(model);
    CHECK(emb.rows == 3);
    CHECK(emb.cols == 5);
    CHECK(emb == model.encoder.layers[0].weight);  // one-hot selects columns
    CHECK(embed_labels(model) == emb);

    model.loss_mode = LossMode::Bce;
    CHECK_THROWS_AS(embed_labels(model), std::logic_error);
}

TEST_CASE("nearest_label_neighbors contract and identity tie-break") {
    Model model = tiny_model(8);
    CHECK(nearest_label_neighbors(model, 0, 0).empty());
    for (std::size_t k = 1; k <= 4; ++k) {
        const auto nb = nearest_label_neighbors(model, 2, k);
        CHECK(nb.size() == k);
        for (const auto& [j, dist] : nb) {
            CHECK(j != 2);
            CHECK(dist >= 0.0);
        }
    }
    CHECK_THROWS_AS(nearest_label_neighbors(model, 9, 1), std::out_of_range);
    CHECK_THROWS_AS(nearest_label_neighbors(model, 0, 5), std::invalid_argument);

    // identity encoder: all pairwise distances sqrt(2), ties by label index
    Model ident;
    ident.latent_dim = 4;
    ident.feature_net = single_layer(Matrix(4, 3));
    ident.encoder = single_layer(Matrix::identity(4));
    ident.decoder = single_layer(Matrix(4, 4));
    const auto nb = nearest_label_neighbors(ident, 1, 3);
    REQUIRE(nb.size() == 3);
    CHECK(nb[0].first == 0);
    CHECK(nb[1].first == 2);
    CHECK(nb[2].first == 3);
    for (const auto& [j, dist] : nb)
        CHECK(dist == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("model serialization round-trips bit-exactly") {
    const MultiLabelDataset ds = synth_correlated(120, 5, 4, 91);
    TrainConfig cfg = fast_config(12);
    cfg.latent_dim = 3;
    auto [model, hist] = train(ds, cfg);
    const std::string path = "/tmp/c2ae_test_model.txt";
    save_model(model, path);
    const Model back = load_model(path);
    CHECK(same_params(model.feature_net, back.feature_net));
    CHECK(same_params(model.encoder, back.encoder));
    CHECK(same_params(model.decoder, back.decoder));
    CHECK(back.alpha == model.alpha);
    CHECK(back.lambda == model.lambda);
    CHECK(back.threshold == model.threshold);
    CHECK(back.calibrated);
    CHECK(back.latent_dim == model.latent_dim);
    CHECK(back.loss_mode == model.loss_mode);
    CHECK(back.normalize_penalty == model.normalize_penalty);
    // identical predictions after the round trip
    Rng rng(66);
    const Matrix x = random_matrix(rng, 5, 7);
    CHECK(predict_labels(back, x) == predict_labels(model, x));
    CHECK(format_model(back) == format_model(model));

    // uncalibrated threshold round-trips as absent
    Model raw = tiny_model(9);
    save_model(raw, path);
    CHECK_FALSE(load_model(path).calibrated);
}

TEST_CASE("model loader rejects unknown versions and malformed files") {
    const std::string path = "/tmp/c2ae_test_badmodel.txt";
    {
        std::FILE* f = std::fopen(path.c_str(), "w");
        std::fputs("c2ae-model 2\nloss_mode c2ae\n", f);
        std::fclose(f);
    }
    CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("unknown model format version"),
                         std::runtime_error);
    {
        std::FILE* f = std::fopen(path.c_str(), "w");
        std::fputs("c2ae-model 1\nloss_mode c2ae\nn_features 2\n", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_model(path), std::runtime_error);
    CHECK_THROWS_AS(load_model("/nonexistent/model.txt"), std::runtime_error);
}

TEST_CASE("baseline training modes run end to end") {
    const MultiLabelDataset ds = synth_correlated(150, 6, 5, 77);
    for (LossMode mode : {LossMode::Bpmll, LossMode::Bce}) {
        TrainConfig cfg = fast_config(31);
        cfg.loss_mode = mode;
        auto [model, hist] = train(ds, cfg);
        CHECK(model.loss_mode == mode);
        CHECK(model.calibrated);
        for (const auto& e : hist.epochs) {
            CHECK(e.mean_phi == 0.0);
            CHECK(std::isfinite(e.mean_total));
        }
        const Matrix pred = predict_labels(model, ds.features);
        CHECK(pred.rows == 5);
        CHECK(pred.cols == 150);
    }
}
