#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "c2ae/dataset.hpp"
#include "c2ae/losses.hpp"
#include "c2ae/network.hpp"
#include "c2ae/optimizer.hpp"

namespace c2ae {

enum class LossMode { C2ae, Bpmll, Bce };

std::string loss_mode_name(LossMode m);
LossMode parse_loss_mode(const std::string& s);

// Three-network model: feature_net maps inputs to the latent space, encoder
// maps label vectors there, decoder maps latent points back to label scores.
// In bpmll/bce mode the encoder is untrained and prediction runs
// decoder(feature_net(x)) as a plain deep classifier with that loss.
struct Model {
    Network feature_net;  // d -> l
    Network encoder;      // m -> l
    Network decoder;      // l -> m
    double alpha = 1.0;
    double lambda = 0.5;
    std::size_t latent_dim = 0;
    LossMode loss_mode = LossMode::C2ae;
    bool normalize_penalty = false;
    bool zero_mean_inputs = false;
    double threshold = 0.0;
    bool calibrated = false;

    std::size_t n_features() const { return feature_net.in_dim(); }
    std::size_t n_labels() const { return decoder.out_dim(); }
};

struct TrainConfig {
    std::size_t batch_size = 500;
    std::size_t epochs = 100;
    std::size_t patience = 10;
    double learning_rate = 1e-2;
    std::uint64_t seed = 1;
    double val_fraction = 1.0 / 6.0;
    std::vector<std::size_t> hidden_dims = {512, 512};
    std::size_t latent_dim = 0;  // 0: use the label count
    double alpha = 1.0;
    double lambda = 0.5;
    std::vector<double> alpha_grid = {0.1, 0.5, 1.0, 2.0, 5.0, 10.0};
    bool alpha_sweep = false;
    LossMode loss_mode = LossMode::C2ae;
    bool missing_mode = false;      // zero-mean encoder inputs for masked data
    bool zero_mean_inputs = false;  // force the zero-mean encoding everywhere
    double leaky_slope = 0.01;
    bool normalize_penalty = true;
    OptAlgo optimizer = OptAlgo::Adam;
    double momentum = 0.9;
    bool verbose = false;
};

struct EpochStats {
    double mean_phi = 0;
    double mean_gamma = 0;
    double mean_total = 0;
    double val_micro_f1 = 0;
    double wall_seconds = 0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
};

std::string format_history(const TrainHistory& h);

// non-finite loss mid-training; the CLI maps this to its numeric-failure exit
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ObjectiveValue {
    double phi = 0;
    double gamma = 0;
    double total = 0;
};

struct ObjectiveGrads {
    NetworkGrads feature_net, encoder, decoder;
};

// phi + alpha * gamma on one batch; encoder_input is the label-side batch
// (raw 0/1 or the zero-mean encoding). Baseline modes score through
// decoder(feature_net(x)) and report phi = 0.
ObjectiveValue objective(const Model& model, const Matrix& features,
                         const Matrix& encoder_input, const LabelSets& sets);
ObjectiveValue objective_and_grads(const Model& model, const Matrix& features,
                                   const Matrix& encoder_input, const LabelSets& sets,
                                   ObjectiveGrads& grads);

std::pair<Model, TrainHistory> train(const MultiLabelDataset& ds, const TrainConfig& cfg);

Matrix predict_scores(const Model& model, const Matrix& features);
Matrix predict_labels(const Model& model, const Matrix& features);  // score > threshold
Matrix predict_labels_at(const Model& model, const Matrix& features, double threshold);

// Scans 101 evenly spaced candidates between the smallest and largest
// validation score and returns the one maximizing validation micro-F1
// (ties toward the smallest candidate). Missing validation labels are
// excluded from the confusion counts.
double calibrate_threshold(const Model& model, const MultiLabelDataset& val);

// column j = encoder applied to the one-hot indicator of label j
Matrix embed_labels(const Model& model);

// k nearest labels to label_index by Euclidean distance in the latent space,
// self excluded, ties broken by ascending label index
std::vector<std::pair<std::size_t, double>> nearest_label_neighbors(const Model& model,
                                                                    std::size_t label_index,
                                                                    std::size_t k);

std::string format_model(const Model& model);
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace c2ae
