#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "c2ae/dataset.hpp"
#include "c2ae/gradcheck.hpp"
#include "c2ae/matrix.hpp"
#include "c2ae/metrics.hpp"
#include "c2ae/model.hpp"

namespace {

using namespace c2ae;

// All file outputs go through a temp-and-rename so a failed command never
// leaves a partial file behind.
void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write file: " + path);
        out << content;
        if (!out) {
            std::remove(tmp.c_str());
            throw std::runtime_error("failed while writing file: " + path);
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::remove(tmp.c_str());
        throw std::runtime_error("cannot move output into place: " + path + ": " + ec.message());
    }
}

struct RunConfig {
    TrainConfig train;
    std::string data;
    std::string out;
};

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw std::runtime_error("config key '" + key + "': expected a boolean, got '" + v + "'");
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& v, Parse parse) {
    std::vector<T> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse(item));
    return out;
}

// Flat "key value" lines; '#' starts a comment; unknown keys are rejected.
void apply_config_file(RunConfig& rc, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#') continue;
        std::istringstream ls(line);
        std::string key, value;
        ls >> key;
        std::getline(ls, value);
        const std::size_t vs = value.find_first_not_of(" \t");
        value = vs == std::string::npos ? "" : value.substr(vs, value.find_last_not_of(" \t\r") - vs + 1);
        if (value.empty())
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": key '" + key +
                                     "' has no value");

        TrainConfig& t = rc.train;
        try {
            if (key == "batch_size") t.batch_size = std::stoull(value);
            else if (key == "epochs") t.epochs = std::stoull(value);
            else if (key == "patience") t.patience = std::stoull(value);
            else if (key == "learning_rate") t.learning_rate = std::stod(value);
            else if (key == "seed") t.seed = std::stoull(value);
            else if (key == "val_fraction") t.val_fraction = std::stod(value);
            else if (key == "hidden_dims")
                t.hidden_dims = parse_list<std::size_t>(
                    value, [](const std::string& s) { return std::stoull(s); });
            else if (key == "latent_dim") t.latent_dim = std::stoull(value);
            else if (key == "alpha") t.alpha = std::stod(value);
            else if (key == "lambda") t.lambda = std::stod(value);
            else if (key == "alpha_grid")
                t.alpha_grid =
                    parse_list<double>(value, [](const std::string& s) { return std::stod(s); });
            else if (key == "alpha_sweep") t.alpha_sweep = parse_bool(value, key);
            else if (key == "loss_mode") t.loss_mode = parse_loss_mode(value);
            else if (key == "missing_mode") t.missing_mode = parse_bool(value, key);
            else if (key == "zero_mean_inputs") t.zero_mean_inputs = parse_bool(value, key);
            else if (key == "leaky_slope") t.leaky_slope = std::stod(value);
            else if (key == "normalize_penalty") t.normalize_penalty = parse_bool(value, key);
            else if (key == "optimizer") {
                if (value == "adam") t.optimizer = OptAlgo::Adam;
                else if (value == "sgd") t.optimizer = OptAlgo::Sgd;
                else throw std::runtime_error("expected 'adam' or 'sgd'");
            } else if (key == "momentum") t.momentum = std::stod(value);
            else if (key == "verbose") t.verbose = parse_bool(value, key);
            else if (key == "data") rc.data = value;
            else if (key == "out") rc.out = value;
            else
                throw std::runtime_error("unknown config key '" + key + "'");
        } catch (const std::runtime_error&) {
            throw;
        } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": bad value for key '" + key + "'");
        }
    }
}

int cmd_train(const std::string& config_path, const std::string& data_flag,
              const std::string& out_flag, bool seed_set, std::uint64_t seed,
              bool loss_set, const std::string& loss, bool missing_flag) {
    RunConfig rc;
    if (!config_path.empty()) apply_config_file(rc, config_path);
    if (!data_flag.empty()) rc.data = data_flag;
    if (!out_flag.empty()) rc.out = out_flag;
    if (seed_set) rc.train.seed = seed;
    if (loss_set) rc.train.loss_mode = parse_loss_mode(loss);
    if (missing_flag) rc.train.missing_mode = true;
    if (rc.data.empty()) throw std::runtime_error("no dataset given (--data or config 'data')");
    if (rc.out.empty()) throw std::runtime_error("no output path given (--out or config 'out')");

    const MultiLabelDataset ds = load_dataset(rc.data);
    auto [model, history] = train(ds, rc.train);
    write_file_atomic(rc.out, format_model(model));
    write_file_atomic(rc.out + ".history", format_history(history));
    std::printf("trained %s model on %zu instances: %zu epochs, val_micro_f1 %.4f, threshold %s\n",
                loss_mode_name(model.loss_mode).c_str(), ds.n_instances, history.epochs.size(),
                history.epochs.back().val_micro_f1, fmt_g17(model.threshold).c_str());
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& report_path) {
    const Model model = load_model(model_path);
    const MultiLabelDataset ds = load_dataset(data_path);
    if (model.n_features() != ds.n_features || model.n_labels() != ds.n_labels)
        throw std::runtime_error(
            "model/data dimension mismatch: model expects d=" + std::to_string(model.n_features()) +
            ", m=" + std::to_string(model.n_labels()) + "; data has d=" +
            std::to_string(ds.n_features) + ", m=" + std::to_string(ds.n_labels));
    if (!model.calibrated)
        throw std::runtime_error("model has no calibrated threshold; cannot evaluate");

    const Matrix pred = predict_labels(model, ds.features);
    const MetricsReport rep = report(confusion(pred, ds.binary_labels()));
    write_file_atomic(report_path, format_report(rep));
    std::printf("c_p %.4f c_r %.4f c_f1 %.4f o_p %.4f o_r %.4f o_f1 %.4f\n", rep.c_p, rep.c_r,
                rep.c_f1, rep.o_p, rep.o_r, rep.o_f1);
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& data_path,
                const std::string& out_path, bool threshold_set, double threshold) {
    const Model model = load_model(model_path);
    const MultiLabelDataset ds = load_dataset(data_path);
    if (model.n_features() != ds.n_features)
        throw std::runtime_error("model/data dimension mismatch: model expects d=" +
                                 std::to_string(model.n_features()) + "; data has d=" +
                                 std::to_string(ds.n_features));
    if (!threshold_set && !model.calibrated)
        throw std::runtime_error("model has no calibrated threshold; pass --threshold");
    const double t = threshold_set ? threshold : model.threshold;

    const Matrix scores = predict_scores(model, ds.features);
    std::string csv;
    csv += "instance";
    for (std::size_t j = 0; j < scores.rows; ++j) csv += ",score_" + std::to_string(j);
    for (std::size_t j = 0; j < scores.rows; ++j) csv += ",pred_" + std::to_string(j);
    csv += '\n';
    for (std::size_t i = 0; i < scores.cols; ++i) {
        csv += std::to_string(i);
        for (std::size_t j = 0; j < scores.rows; ++j) csv += "," + fmt_g17(scores(j, i));
        for (std::size_t j = 0; j < scores.rows; ++j)
            csv += scores(j, i) > t ? ",1" : ",0";
        csv += '\n';
    }
    write_file_atomic(out_path, csv);
    return 0;
}

int cmd_synth(std::size_t n, std::size_t d, std::size_t m, std::uint64_t seed,
              const std::string& out_path) {
    write_file_atomic(out_path, format_dataset(synth_correlated(n, d, m, seed)));
    return 0;
}

int cmd_mask(const std::string& data_path, double rate, std::uint64_t seed,
             const std::string& out_path) {
    const MultiLabelDataset ds = load_dataset(data_path);
    write_file_atomic(out_path, format_dataset(mask_labels(ds, rate, seed)));
    return 0;
}

int cmd_neighbors(const std::string& model_path, std::size_t label, std::size_t k) {
    const Model model = load_model(model_path);
    const auto neighbors = nearest_label_neighbors(model, label, k);
    for (std::size_t r = 0; r < neighbors.size(); ++r)
        std::printf("%zu %zu %s\n", r + 1, neighbors[r].first,
                    fmt_g17(neighbors[r].second).c_str());
    return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
    const GradCheckReport suites[] = {
        check_latent_grads(mix_seed(seed, 101), 200),
        check_output_grads(mix_seed(seed, 102), 200),
        check_bce_grads(mix_seed(seed, 103), 100),
        check_network_backward(mix_seed(seed, 104), 100),
        check_objective_grads(mix_seed(seed, 105), 20),
    };
    bool ok = true;
    std::size_t passed = 0, total = 0;
    for (const auto& rep : suites) {
        std::printf("%-18s cases %4zu  failures %3zu  max_rel_err %.3g\n", rep.name.c_str(),
                    rep.cases, rep.failures, rep.max_rel_err);
        ok = ok && rep.passed();
        passed += rep.cases - rep.failures;
        total += rep.cases;
    }
    // the sign-flipped printed form must NOT match finite differences
    const GradCheckReport neg = check_latent_grads_printed_form(mix_seed(seed, 106), 50);
    std::printf("%-18s cases %4zu  mismatches %3zu (expected all)\n", neg.name.c_str(), neg.cases,
                neg.failures);
    ok = ok && neg.failures == neg.cases;
    std::printf("%zu/%zu gradient checks passed\n", passed, total);
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-label classifier with a jointly learned feature/label latent space"};
    app.require_subcommand(1);

    auto* sc_train = app.add_subcommand("train", "train a model");
    std::string tr_data, tr_config, tr_out, tr_loss;
    std::uint64_t tr_seed = 0;
    bool tr_missing = false;
    sc_train->add_option("--data", tr_data, "dataset file");
    sc_train->add_option("--config", tr_config, "key-value config file");
    sc_train->add_option("--out", tr_out, "output model file");
    auto* tr_seed_opt = sc_train->add_option("--seed", tr_seed, "random seed");
    auto* tr_loss_opt =
        sc_train->add_option("--loss", tr_loss, "loss mode: c2ae, bpmll, or bce");
    sc_train->add_flag("--missing", tr_missing, "zero-mean encoder inputs for missing labels");

    auto* sc_eval = app.add_subcommand("eval", "evaluate a model on a dataset");
    std::string ev_model, ev_data, ev_report;
    sc_eval->add_option("--model", ev_model)->required();
    sc_eval->add_option("--data", ev_data)->required();
    sc_eval->add_option("--report", ev_report)->required();

    auto* sc_predict = app.add_subcommand("predict", "write per-instance scores and labels");
    std::string pr_model, pr_data, pr_out;
    double pr_threshold = 0.0;
    sc_predict->add_option("--model", pr_model)->required();
    sc_predict->add_option("--data", pr_data)->required();
    sc_predict->add_option("--out", pr_out)->required();
    auto* pr_thr_opt = sc_predict->add_option("--threshold", pr_threshold,
                                              "override the calibrated threshold");

    auto* sc_synth = app.add_subcommand("synth", "generate a synthetic correlated dataset");
    std::size_t sy_n = 2000, sy_d = 20, sy_m = 10;
    std::uint64_t sy_seed = 1;
    std::string sy_out;
    sc_synth->add_option("--n", sy_n, "instances");
    sc_synth->add_option("--d", sy_d, "features");
    sc_synth->add_option("--m", sy_m, "labels");
    sc_synth->add_option("--seed", sy_seed);
    sc_synth->add_option("--out", sy_out)->required();

    auto* sc_mask = app.add_subcommand("mask", "simulate missing labels");
    std::string mk_data, mk_out;
    double mk_rate = 0.0;
    std::uint64_t mk_seed = 1;
    sc_mask->add_option("--data", mk_data)->required();
    sc_mask->add_option("--rate", mk_rate, "per-label missing probability")->required();
    sc_mask->add_option("--seed", mk_seed);
    sc_mask->add_option("--out", mk_out)->required();

    auto* sc_neighbors = app.add_subcommand("neighbors", "nearest labels in the latent space");
    std::string nb_model;
    std::size_t nb_label = 0, nb_k = 5;
    sc_neighbors->add_option("--model", nb_model)->required();
    sc_neighbors->add_option("--label", nb_label)->required();
    sc_neighbors->add_option("--k", nb_k);

    auto* sc_gradcheck = app.add_subcommand("gradcheck", "run the finite-difference suites");
    std::uint64_t gc_seed = 1;
    sc_gradcheck->add_option("--seed", gc_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sc_train->parsed())
            return cmd_train(tr_config, tr_data, tr_out, tr_seed_opt->count() > 0, tr_seed,
                             tr_loss_opt->count() > 0, tr_loss, tr_missing);
        if (sc_eval->parsed()) return cmd_eval(ev_model, ev_data, ev_report);
        if (sc_predict->parsed())
            return cmd_predict(pr_model, pr_data, pr_out, pr_thr_opt->count() > 0, pr_threshold);
        if (sc_synth->parsed()) return cmd_synth(sy_n, sy_d, sy_m, sy_seed, sy_out);
        if (sc_mask->parsed()) return cmd_mask(mk_data, mk_rate, mk_seed, mk_out);
        if (sc_neighbors->parsed()) return cmd_neighbors(nb_model, nb_label, nb_k);
        if (sc_gradcheck->parsed()) return cmd_gradcheck(gc_seed);
    } catch (const TrainingError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
