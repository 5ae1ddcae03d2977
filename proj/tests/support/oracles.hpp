// Independent reference computations used to freeze expected values.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "srpeval/dtree.hpp"

namespace oracle {

struct Cm {
    double tp, fn, fp, tn;
};

struct Figures {
    std::optional<double> precision, recall, f1, kappa;
};

// Closed forms written out directly from the definitions.
inline Figures metrics(Cm m) {
    Figures f;
    const double n = m.tp + m.fn + m.fp + m.tn;
    if (m.tp + m.fp > 0) f.precision = m.tp / (m.tp + m.fp);
    if (m.tp + m.fn > 0) f.recall = m.tp / (m.tp + m.fn);
    if (f.precision && f.recall)
        f.f1 = (m.tp == 0) ? 0.0 : 2.0 * m.tp / (2.0 * m.tp + m.fp + m.fn);
    const double po = (m.tp + m.tn) / n;
    const double pe = ((m.tp + m.fn) * (m.tp + m.fp) + (m.fp + m.tn) * (m.fn + m.tn)) / (n * n);
    if (pe < 1.0) f.kappa = (po - pe) / (1.0 - pe);
    return f;
}

// Pascal's triangle in exact integers; n <= 60 fits in 64 bits.
inline std::vector<std::vector<std::uint64_t>> pascal(int n) {
    std::vector<std::vector<std::uint64_t>> rows(n + 1);
    for (int i = 0; i <= n; ++i) {
        rows[i].assign(i + 1, 1);
        for (int j = 1; j < i; ++j) rows[i][j] = rows[i - 1][j - 1] + rows[i - 1][j];
    }
    return rows;
}

inline double mcnemar_exact(long b, long c) {
    const long n = b + c;
    if (n == 0) return 1.0;
    const auto rows = pascal(static_cast<int>(n));
    std::uint64_t tail = 0;
    for (long i = 0; i <= std::min(b, c); ++i) tail += rows[n][i];
    const double p = 2.0 * static_cast<double>(tail) / std::ldexp(1.0, static_cast<int>(n));
    return std::min(1.0, p);
}

// Upper tail of chi-square(1) via Simpson integration of the half-normal density.
inline double chi2_1_sf(double x) {
    const double z = std::sqrt(x);
    const int steps = 20000;
    const double h = z / steps;
    auto f = [](double u) { return 2.0 / std::sqrt(2.0 * M_PI) * std::exp(-u * u / 2.0); };
    double s = f(0) + f(z);
    for (int i = 1; i < steps; ++i) s += f(i * h) * (i % 2 ? 4.0 : 2.0);
    return 1.0 - s * h / 3.0;
}

inline double gini(double c, double n) {
    const double t = c + n;
    if (t == 0) return 0.0;
    const double p = c / t;
    return 2.0 * p * (1.0 - p);
}

// Straightforward recursive CART, written without the arena or any shared code.
struct Node {
    int feature = -1;
    Node* left = nullptr;
    Node* right = nullptr;
    srpeval::Label label = srpeval::Label::Complex;
    ~Node() {
        delete left;
        delete right;
    }
};

inline Node* build(const std::vector<srpeval::FeatureVector>& X, const std::vector<srpeval::Label>& y,
                   const std::vector<int>& idx, int depth, int max_depth, int min_leaf) {
    int c = 0;
    for (int i : idx) c += y[i] == srpeval::Label::Complex;
    const int nc = static_cast<int>(idx.size()) - c;
    auto* node = new Node;
    node->label = c >= nc ? srpeval::Label::Complex : srpeval::Label::NotComplex;
    if (depth >= max_depth || c == 0 || nc == 0) return node;
    const double parent = gini(c, nc);
    int best_f = -1;
    double best = parent;
    for (int f = 0; f < srpeval::kFeatureCount; ++f) {
        int lc = 0, ln = 0, rc = 0, rn = 0;
        for (int i : idx) {
            const bool left = X[i][f] <= 0.5;
            const bool cx = y[i] == srpeval::Label::Complex;
            (left ? (cx ? lc : ln) : (cx ? rc : rn))++;
        }
        if (lc + ln < min_leaf || rc + rn < min_leaf) continue;
        const double total = static_cast<double>(idx.size());
        const double w = (lc + ln) / total * gini(lc, ln) + (rc + rn) / total * gini(rc, rn);
        if (w < best - 1e-12) {
            best = w;
            best_f = f;
        }
    }
    if (best_f < 0) return node;
    std::vector<int> li, ri;
    for (int i : idx) (X[i][best_f] <= 0.5 ? li : ri).push_back(i);
    node->feature = best_f;
    node->left = build(X, y, li, depth + 1, max_depth, min_leaf);
    node->right = build(X, y, ri, depth + 1, max_depth, min_leaf);
    return node;
}

inline srpeval::Label predict(const Node* n, const srpeval::FeatureVector& x) {
    while (n->feature >= 0) n = x[n->feature] <= 0.5 ? n->left : n->right;
    return n->label;
}

}  // namespace oracle
