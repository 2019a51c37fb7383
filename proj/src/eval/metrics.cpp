#include "contam/eval.hpp"

#include "contam/error.hpp"

#include <cmath>

namespace contam::eval {

void ConfusionMatrix::validate() const {
    for (double v : {tn, fp, fn, tp}) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw UsageError("confusion matrix entries must be finite and >= 0");
    }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    tp += o.tp;
    return *this;
}

ConfusionMatrix operator*(const ConfusionMatrix& cm, double s) {
    return {cm.tn * s, cm.fp * s, cm.fn * s, cm.tp * s};
}

void tally(ConfusionMatrix& cm, bool truth, bool predicted) {
    if (truth) {
        (predicted ? cm.tp : cm.fn) += 1.0;
    } else {
        (predicted ? cm.fp : cm.tn) += 1.0;
    }
}

namespace {

Score ratio(double num, double den) {
    if (den <= 0.0) return {0.0, true};
    return {num / den, false};
}

}  // namespace

Score precision(const ConfusionMatrix& cm) {
    cm.validate();
    return ratio(cm.tp, cm.tp + cm.fp);
}

Score recall(const ConfusionMatrix& cm) {
    cm.validate();
    return ratio(cm.tp, cm.tp + cm.fn);
}

Score accuracy(const ConfusionMatrix& cm) {
    cm.validate();
    return ratio(cm.tp + cm.tn, cm.total());
}

Score f_beta(const ConfusionMatrix& cm, double beta) {
    if (!(beta > 0.0)) throw UsageError("beta must be > 0");
    const Score p = precision(cm), r = recall(cm);
    const double b2 = beta * beta;
    const double den = b2 * p.value + r.value;
    if (den <= 0.0) return {0.0, true};
    return {(1.0 + b2) * p.value * r.value / den, p.degenerate || r.degenerate};
}

Score fp_rate(const ConfusionMatrix& cm) {
    cm.validate();
    return ratio(cm.fp, cm.fp + cm.tn);
}

Score fn_rate(const ConfusionMatrix& cm) {
    cm.validate();
    return ratio(cm.fn, cm.fn + cm.tp);
}

MetricsRow make_row(const ConfusionMatrix& cm, const cnn::Hyperparams& hp) {
    MetricsRow row;
    row.cm = cm;
    row.hyperparams = hp;
    const Score f2 = f_beta(cm, 2.0), f1 = f_beta(cm, 1.0), acc = accuracy(cm), p = precision(cm), r = recall(cm);
    row.f2 = f2;
    row.f1 = f1;
    row.accuracy = acc;
    row.precision = p;
    row.recall = r;
    row.degenerate = f2.degenerate || f1.degenerate || acc.degenerate || p.degenerate || r.degenerate;
    return row;
}

}  // namespace contam::eval
