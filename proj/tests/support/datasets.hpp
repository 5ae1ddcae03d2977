// Deterministic synthetic datasets shared by unit and acceptance tests.
#pragma once

#include <random>
#include <vector>

#include "srpeval/dtree.hpp"

namespace datasets {

struct Data {
    std::vector<srpeval::FeatureVector> X;
    std::vector<srpeval::Label> y;
};

// Labels follow the three reference decision paths exactly:
//   Q7 <= .5 and Q2 <= .5 -> Complex; Q7 <= .5 and Q2 > .5 -> NotComplex;
//   Q7 > .5 and Q9 <= .5 and Q5 <= .5 -> Complex; everything else NotComplex.
// Group sizes are chosen so greedy Gini splitting finds those cuts first.
inline srpeval::Label reference_paths(const srpeval::FeatureVector& x) {
    const double q2 = x[1], q5 = x[4], q7 = x[6], q9 = x[8];
    if (q7 <= 0.5) return q2 <= 0.5 ? srpeval::Label::Complex : srpeval::Label::NotComplex;
    return q9 <= 0.5 && q5 <= 0.5 ? srpeval::Label::Complex : srpeval::Label::NotComplex;
}

inline Data decision_paths(std::uint64_t seed = 7) {
    std::mt19937_64 rng(seed);
    auto low = [&] { return (rng() & 1) ? 0.5 : 0.0; };
    auto noise = [&] { return static_cast<double>(rng() % 3) / 2.0; };
    Data d;
    auto add = [&](double q7, double q2, double q9, double q5) {
        srpeval::FeatureVector x{};
        for (auto& v : x) v = noise();
        x[6] = q7;
        x[1] = q2;
        x[8] = q9;
        x[4] = q5;
        d.X.push_back(x);
        d.y.push_back(reference_paths(x));
    };
    for (int i = 0; i < 180; ++i) add(low(), low(), noise(), noise());
    for (int i = 0; i < 20; ++i) add(low(), 1.0, noise(), noise());
    for (int i = 0; i < 160; ++i) add(1.0, i % 2 ? 1.0 : low(), 1.0, i % 2 ? low() : 1.0);
    for (int i = 0; i < 20; ++i) add(1.0, i % 2 ? 1.0 : low(), low(), low());
    for (int i = 0; i < 20; ++i) add(1.0, i % 2 ? 1.0 : low(), low(), 1.0);
    return d;
}

// n samples over `active` features valued in {0, .5, 1}; other features are 0.
inline Data random_small(std::mt19937_64& rng, int n, int active) {
    Data d;
    for (int i = 0; i < n; ++i) {
        srpeval::FeatureVector x{};
        for (int f = 0; f < active; ++f) x[f] = static_cast<double>(rng() % 3) / 2.0;
        d.X.push_back(x);
        d.y.push_back(rng() % 2 ? srpeval::Label::Complex : srpeval::Label::NotComplex);
    }
    return d;
}

// Every point of {0, .5, 1}^active with the remaining features at 0.
inline std::vector<srpeval::FeatureVector> lattice(int active) {
    std::vector<srpeval::FeatureVector> out;
    int total = 1;
    for (int i = 0; i < active; ++i) total *= 3;
    for (int code = 0; code < total; ++code) {
        srpeval::FeatureVector x{};
        int c = code;
        for (int f = 0; f < active; ++f, c /= 3) x[f] = (c % 3) / 2.0;
        out.push_back(x);
    }
    return out;
}

// Exactly `complex` Complex labels spread evenly through n positions.
inline std::vector<srpeval::Label> stratified_labels(int complex, int n) {
    std::vector<srpeval::Label> y;
    for (int i = 0; i < n; ++i)
        y.push_back((i * complex) / n != ((i + 1) * complex) / n ? srpeval::Label::Complex
                                                                 : srpeval::Label::NotComplex);
    return y;
}

}  // namespace datasets
