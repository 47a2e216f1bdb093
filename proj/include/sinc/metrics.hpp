#pragma once

#include "sinc/types.hpp"

#include <vector>

namespace sinc {

struct ConfusionCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    long tn = 0;

    long total() const noexcept { return tp + fp + fn + tn; }
};

/// Counts over a flat index universe. Throws UniverseMismatch on size mismatch.
ConfusionCounts confusion(const std::vector<bool>& estimate, const std::vector<bool>& truth);

/// Unordered pairs i < j of two p x p adjacency matrices.
ConfusionCounts edge_confusion(const BoolMatrix& estimate, const BoolMatrix& truth);

/// Every entry of two equally shaped supports (coefficients: q x p).
ConfusionCounts support_confusion(const BoolMatrix& estimate, const BoolMatrix& truth);

/// 0/0 ratios are reported as 0.
struct Scores {
    double tpr = 0.0;
    double fpr = 0.0;
    double f1 = 0.0;
    double mcc = 0.0;
};

Scores scores(const ConfusionCounts& c);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

/// Trapezoidal area through (0,0), the points sorted by (fpr, tpr), and (1,1).
double roc_auc(std::vector<RocPoint> points);

}  // namespace sinc
