#include "prism/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <thread>

#include "detail.hpp"
#include "prism/error.hpp"
#include "prism/random.hpp"

namespace prism {

std::vector<double> LinearClassifier::scores(std::span<const double> x) const {
    if (x.size() != feature_dim())
        throw PreconditionError("feature dimension " + std::to_string(x.size()) +
                                " differs from classifier dimension " +
                                std::to_string(feature_dim()));
    std::vector<double> s(classes.size());
    for (std::size_t c = 0; c < classes.size(); ++c) s[c] = biases[c] + dot(weights[c], x);
    return s;
}

int LinearClassifier::predict(std::span<const double> x) const {
    const auto s = scores(x);
    std::size_t best = 0;
    for (std::size_t c = 1; c < s.size(); ++c)
        if (s[c] > s[best]) best = c;
    return classes[best];
}

std::vector<int> LinearClassifier::predict_all(const std::vector<std::vector<double>>& X) const {
    std::vector<int> out;
    out.reserve(X.size());
    for (const auto& x : X) out.push_back(predict(x));
    return out;
}

namespace {

void softmax_inplace(std::vector<double>& s) {
    const double mx = *std::max_element(s.begin(), s.end());
    double z = 0.0;
    for (double& v : s) {
        v = std::exp(v - mx);
        z += v;
    }
    for (double& v : s) v /= z;
}

std::size_t class_position(const std::vector<int>& classes, int label) {
    auto it = std::lower_bound(classes.begin(), classes.end(), label);
    if (it == classes.end() || *it != label)
        throw PreconditionError("label " + std::to_string(label) + " unknown to the classifier");
    return static_cast<std::size_t>(it - classes.begin());
}

}  // namespace

double classifier_loss(const LinearClassifier& clf, const std::vector<std::vector<double>>& X,
                       const std::vector<int>& y) {
    if (X.size() != y.size() || X.empty()) throw PreconditionError("X and y must be non-empty and equal length");
    double loss = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        auto p = clf.scores(X[i]);
        softmax_inplace(p);
        loss -= std::log(std::max(p[class_position(clf.classes, y[i])], 1e-300));
    }
    return loss / static_cast<double>(X.size());
}

LinearClassifier train_classifier(const std::vector<std::vector<double>>& X,
                                  const std::vector<int>& y, const ClassifierConfig& config) {
    if (X.size() != y.size()) throw PreconditionError("X and y differ in length");
    if (X.empty()) throw PreconditionError("no training examples");
    const std::size_t d = X.front().size();
    for (const auto& x : X)
        if (x.size() != d) throw PreconditionError("feature vectors differ in dimension");
    if (config.batch == 0) throw PreconditionError("batch size must be positive");
    if (!(config.learning_rate > 0.0)) throw PreconditionError("learning rate must be positive");

    LinearClassifier clf;
    clf.classes = y;
    std::sort(clf.classes.begin(), clf.classes.end());
    clf.classes.erase(std::unique(clf.classes.begin(), clf.classes.end()), clf.classes.end());
    if (clf.classes.size() < 2) throw PreconditionError("training labels contain a single class");
    if (X.size() < clf.classes.size())
        throw PreconditionError("fewer examples than classes");
    const std::size_t K = clf.classes.size();
    clf.weights.assign(K, std::vector<double>(d, 0.0));
    clf.biases.assign(K, 0.0);

    std::vector<std::size_t> target(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) target[i] = class_position(clf.classes, y[i]);

    std::vector<std::size_t> order(X.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(config.seed);
    std::vector<std::vector<double>> gw(K, std::vector<double>(d));
    std::vector<double> gb(K);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += config.batch) {
            const std::size_t end = std::min(order.size(), start + config.batch);
            for (auto& row : gw) std::fill(row.begin(), row.end(), 0.0);
            std::fill(gb.begin(), gb.end(), 0.0);
            for (std::size_t b = start; b < end; ++b) {
                const std::size_t i = order[b];
                auto p = clf.scores(X[i]);
                softmax_inplace(p);
                p[target[i]] -= 1.0;
                for (std::size_t c = 0; c < K; ++c) {
                    if (p[c] == 0.0) continue;
                    gb[c] += p[c];
                    for (std::size_t j = 0; j < d; ++j) gw[c][j] += p[c] * X[i][j];
                }
            }
            const double scale = config.learning_rate / static_cast<double>(end - start);
            for (std::size_t c = 0; c < K; ++c) {
                clf.biases[c] -= scale * gb[c];
                for (std::size_t j = 0; j < d; ++j)
                    clf.weights[c][j] -= scale * gw[c][j] +
                                         config.learning_rate * config.l2 * clf.weights[c][j];
            }
        }
    }
    clf.final_loss = classifier_loss(clf, X, y);
    return clf;
}

ClassificationReport compute_metrics(std::span<const int> pred, std::span<const int> gold,
                                     std::span<const int> classes) {
    if (pred.size() != gold.size())
        throw PreconditionError("pred and gold differ in length");
    if (pred.empty()) throw PreconditionError("no labels to score");

    ClassificationReport r;
    if (classes.empty()) {
        r.classes.assign(pred.begin(), pred.end());
        r.classes.insert(r.classes.end(), gold.begin(), gold.end());
    } else {
        r.classes.assign(classes.begin(), classes.end());
    }
    std::sort(r.classes.begin(), r.classes.end());
    r.classes.erase(std::unique(r.classes.begin(), r.classes.end()), r.classes.end());
    const std::size_t K = r.classes.size();

    r.confusion.assign(K, std::vector<std::size_t>(K, 0));
    for (std::size_t i = 0; i < pred.size(); ++i)
        r.confusion[class_position(r.classes, gold[i])][class_position(r.classes, pred[i])]++;

    std::size_t correct = 0;
    r.precision.assign(K, 0.0);
    r.recall.assign(K, 0.0);
    r.f1.assign(K, 0.0);
    r.support.assign(K, 0);
    for (std::size_t c = 0; c < K; ++c) {
        const std::size_t tp = r.confusion[c][c];
        correct += tp;
        std::size_t predicted = 0, actual = 0;
        for (std::size_t o = 0; o < K; ++o) {
            predicted += r.confusion[o][c];
            actual += r.confusion[c][o];
        }
        r.support[c] = actual;
        if (predicted == 0)
            r.undefined_precision.push_back(r.classes[c]);
        else
            r.precision[c] = static_cast<double>(tp) / static_cast<double>(predicted);
        if (actual == 0)
            r.undefined_recall.push_back(r.classes[c]);
        else
            r.recall[c] = static_cast<double>(tp) / static_cast<double>(actual);
        const double pr = r.precision[c] + r.recall[c];
        r.f1[c] = pr > 0.0 ? 2.0 * r.precision[c] * r.recall[c] / pr : 0.0;
    }
    const double n = static_cast<double>(pred.size());
    const double kk = static_cast<double>(K);
    r.accuracy = static_cast<double>(correct) / n;
    r.precision_macro = std::accumulate(r.precision.begin(), r.precision.end(), 0.0) / kk;
    r.recall_macro = std::accumulate(r.recall.begin(), r.recall.end(), 0.0) / kk;
    r.f1_macro = std::accumulate(r.f1.begin(), r.f1.end(), 0.0) / kk;
    // pooled tp/fp/fn: every miss is one fp and one fn, so micro P = R = accuracy
    const double tp = static_cast<double>(correct);
    const double fp = n - tp;
    const double fn = n - tp;
    const double micro_p = tp / (tp + fp);
    const double micro_r = tp / (tp + fn);
    r.f1_micro = micro_p + micro_r > 0.0 ? 2.0 * micro_p * micro_r / (micro_p + micro_r) : 0.0;
    return r;
}

FrontierRow frontier_point(std::span<const DualSpaceItem> pool,
                           const std::vector<std::vector<double>>& queries,
                           const RetrievalConfig& config) {
    if (queries.empty()) throw PreconditionError("frontier sweep needs at least one query");
    FrontierRow row{config.mu, 0.0, 0.0};
    for (const auto& q : queries) {
        const auto r = greedy_dkmips(pool, q, config);
        row.mean_sim += r.sim;
        row.mean_div += r.div;
    }
    row.mean_sim /= static_cast<double>(queries.size());
    row.mean_div /= static_cast<double>(queries.size());
    return row;
}

std::vector<FrontierRow> frontier_sweep(std::span<const DualSpaceItem> pool,
                                        const std::vector<std::vector<double>>& queries,
                                        std::span<const double> mu_values,
                                        const RetrievalConfig& config_template,
                                        std::size_t workers) {
    if (mu_values.empty()) throw PreconditionError("frontier sweep needs at least one mu");
    for (double mu : mu_values)
        if (!(mu > 0.0 && mu < 1.0)) throw PreconditionError("every mu must lie in (0, 1)");
    std::vector<FrontierRow> rows(mu_values.size());
    auto run = [&](std::size_t i) {
        RetrievalConfig c = config_template;
        c.mu = mu_values[i];
        rows[i] = frontier_point(pool, queries, c);
    };
    workers = std::max<std::size_t>(1, std::min(workers, mu_values.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < mu_values.size(); ++i) run(i);
        return rows;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> threads;
        for (std::size_t w = 0; w < workers; ++w)
            threads.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < mu_values.size(); i += workers) run(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return rows;
}

void write_frontier(std::ostream& out, const std::vector<FrontierRow>& rows,
                    const std::string& header) {
    if (!header.empty()) out << header << '\n';
    out << "mu\tmean_sim\tmean_div\n";
    for (const auto& r : rows)
        out << detail::format_double(r.mu) << '\t' << detail::format_fixed(r.mean_sim, 6) << '\t'
            << detail::format_fixed(r.mean_div, 6) << '\n';
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw PreconditionError("spearman inputs differ in length");
    if (x.size() < 2) throw PreconditionError("spearman needs at least two points");
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace prism
