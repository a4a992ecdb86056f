#include "c2ae/metrics.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace c2ae {

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

ConfusionCounts confusion(const Matrix& pred, const Matrix& truth) {
    if (!pred.same_shape(truth))
        throw std::invalid_argument("confusion: prediction and truth shapes differ");
    ConfusionCounts c;
    c.n_labels = pred.rows;
    c.tp.assign(pred.rows, 0);
    c.fp.assign(pred.rows, 0);
    c.fn.assign(pred.rows, 0);
    c.tn.assign(pred.rows, 0);
    for (std::size_t j = 0; j < pred.rows; ++j) {
        for (std::size_t i = 0; i < pred.cols; ++i) {
            const bool p = pred(j, i) != 0.0;
            const bool t = truth(j, i) != 0.0;
            if (p && t) ++c.tp[j];
            else if (p && !t) ++c.fp[j];
            else if (!p && t) ++c.fn[j];
            else ++c.tn[j];
        }
    }
    return c;
}

MetricsReport report(const ConfusionCounts& counts) {
    MetricsReport r;
    const std::size_t m = counts.n_labels;
    r.precision.resize(m);
    r.recall.resize(m);
    r.f1.resize(m);

    double sum_tp = 0, sum_fp = 0, sum_fn = 0;
    for (std::size_t j = 0; j < m; ++j) {
        const double tp = static_cast<double>(counts.tp[j]);
        const double fp = static_cast<double>(counts.fp[j]);
        const double fn = static_cast<double>(counts.fn[j]);
        r.precision[j] = ratio(tp, tp + fp);
        r.recall[j] = ratio(tp, tp + fn);
        r.f1[j] = f1_of(r.precision[j], r.recall[j]);
        r.c_p += r.precision[j];
        r.c_r += r.recall[j];
        r.c_f1 += r.f1[j];
        sum_tp += tp;
        sum_fp += fp;
        sum_fn += fn;
    }
    if (m > 0) {
        r.c_p /= static_cast<double>(m);
        r.c_r /= static_cast<double>(m);
        r.c_f1 /= static_cast<double>(m);
    }
    r.o_p = ratio(sum_tp, sum_tp + sum_fp);
    r.o_r = ratio(sum_tp, sum_tp + sum_fn);
    r.o_f1 = f1_of(r.o_p, r.o_r);
    return r;
}

double micro_f1(const Matrix& pred, const Matrix& truth) {
    return report(confusion(pred, truth)).o_f1;
}

std::string format_report(const MetricsReport& r) {
    std::string out = "c2ae-report 1\n";
    out += "n_labels " + std::to_string(r.f1.size()) + "\n";
    out += "c_p " + fmt_g17(r.c_p) + "\n";
    out += "c_r " + fmt_g17(r.c_r) + "\n";
    out += "c_f1 " + fmt_g17(r.c_f1) + "\n";
    out += "o_p " + fmt_g17(r.o_p) + "\n";
    out += "o_r " + fmt_g17(r.o_r) + "\n";
    out += "o_f1 " + fmt_g17(r.o_f1) + "\n";
    auto row = [&out](const char* key, const std::vector<double>& v) {
        out += key;
        for (double x : v) {
            out += ' ';
            out += fmt_g17(x);
        }
        out += '\n';
    };
    row("label_precision", r.precision);
    row("label_recall", r.recall);
    row("label_f1", r.f1);
    return out;
}

void save_report(const MetricsReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report file: " + path);
    out << format_report(r);
    if (!out) throw std::runtime_error("failed while writing report file: " + path);
}

MetricsReport load_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open report file: " + path);
    std::string header;
    std::getline(in, header);
    if (header != "c2ae-report 1")
        throw std::runtime_error(path + ": unknown report format version");

    MetricsReport r;
    std::size_t m = 0;
    std::string key;
    while (in >> key) {
        if (key == "n_labels") in >> m;
        else if (key == "c_p") in >> r.c_p;
        else if (key == "c_r") in >> r.c_r;
        else if (key == "c_f1") in >> r.c_f1;
        else if (key == "o_p") in >> r.o_p;
        else if (key == "o_r") in >> r.o_r;
        else if (key == "o_f1") in >> r.o_f1;
        else if (key == "label_precision" || key == "label_recall" || key == "label_f1") {
            auto& v = key == "label_precision" ? r.precision
                      : key == "label_recall"  ? r.recall
                                               : r.f1;
            v.resize(m);
            for (double& x : v) in >> x;
        } else {
            throw std::runtime_error(path + ": unknown report key '" + key + "'");
        }
    }
    return r;
}

}  // namespace c2ae
