#include "sinc/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace sinc {

namespace {

double ratio(double num, double den)
{
    return den == 0.0 ? 0.0 : num / den;
}

void tally(ConfusionCounts& c, bool est, bool truth)
{
    if (est && truth) {
        ++c.tp;
    } else if (est) {
        ++c.fp;
    } else if (truth) {
        ++c.fn;
    } else {
        ++c.tn;
    }
}

}  // namespace

ConfusionCounts confusion(const std::vector<bool>& estimate, const std::vector<bool>& truth)
{
    if (estimate.size() != truth.size()) {
        throw Error(ErrorKind::UniverseMismatch,
                    "estimate has " + std::to_string(estimate.size()) + " items, truth has " +
                        std::to_string(truth.size()));
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        tally(c, estimate[i], truth[i]);
    }
    return c;
}

ConfusionCounts edge_confusion(const BoolMatrix& estimate, const BoolMatrix& truth)
{
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols() ||
        truth.rows() != truth.cols()) {
        throw Error(ErrorKind::UniverseMismatch, "adjacency matrices must be square and equal in size");
    }
    ConfusionCounts c;
    for (Index i = 0; i < truth.rows(); ++i) {
        for (Index j = i + 1; j < truth.cols(); ++j) {
            tally(c, estimate(i, j), truth(i, j));
        }
    }
    return c;
}

ConfusionCounts support_confusion(const BoolMatrix& estimate, const BoolMatrix& truth)
{
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) {
        throw Error(ErrorKind::UniverseMismatch, "supports differ in shape");
    }
    ConfusionCounts c;
    for (Index j = 0; j < truth.cols(); ++j) {
        for (Index i = 0; i < truth.rows(); ++i) {
            tally(c, estimate(i, j), truth(i, j));
        }
    }
    return c;
}

Scores scores(const ConfusionCounts& c)
{
    const double tp = static_cast<double>(c.tp);
    const double fp = static_cast<double>(c.fp);
    const double fn = static_cast<double>(c.fn);
    const double tn = static_cast<double>(c.tn);
    Scores s;
    s.tpr = ratio(tp, tp + fn);
    s.fpr = ratio(fp, fp + tn);
    s.f1 = ratio(2.0 * tp, 2.0 * tp + fp + fn);
    const double margins = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    s.mcc = margins == 0.0 ? 0.0 : (tp * tn - fp * fn) / std::sqrt(margins);
    return s;
}

double roc_auc(std::vector<RocPoint> points)
{
    if (points.empty()) {
        throw Error(ErrorKind::InvalidArgument, "roc_auc needs at least one point");
    }
    points.push_back({0.0, 0.0});
    points.push_back({1.0, 1.0});
    std::sort(points.begin(), points.end(), [](const RocPoint& a, const RocPoint& b) {
        return a.fpr != b.fpr ? a.fpr < b.fpr : a.tpr < b.tpr;
    });
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        area += 0.5 * (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr);
    }
    return area;
}

}  // namespace sinc
