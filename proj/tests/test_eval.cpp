#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "oracles.hpp"
#include "prism/error.hpp"
#include "prism/eval.hpp"
#include "prism/random.hpp"

using namespace prism;

namespace {

constexpr int L = 0, R = 2;

std::vector<DualSpaceItem> pool(Rng& rng, std::size_t n) {
    std::vector<DualSpaceItem> out;
    for (std::size_t i = 0; i < n; ++i) {
        DualSpaceItem it{"i" + std::to_string(i), Vector(4), std::vector<double>(3),
                         static_cast<int>(rng.below(5)) - 2};
        for (double& x : it.rel_vec) x = rng.normal();
        for (double& x : it.div_vec) x = rng.uniform(-1, 1);
        out.push_back(it);
    }
    return out;
}

}  // namespace

TEST_CASE("separable toy set is fitted exactly") {
    std::vector<std::vector<double>> X;
    std::vector<int> y;
    Rng rng(1);
    for (int i = 0; i < 40; ++i) {
        const int cls = i % 2;
        X.push_back({(cls ? 1.0 : -1.0) + rng.uniform(-0.4, 0.4), rng.uniform(-1, 1)});
        y.push_back(cls ? 7 : 3);
    }
    const auto clf = train_classifier(X, y, {});
    CHECK(clf.classes == std::vector<int>{3, 7});
    CHECK(clf.predict_all(X) == y);
    CHECK(clf.final_loss == doctest::Approx(classifier_loss(clf, X, y)));
    CHECK(clf.final_loss < std::log(2.0));

    const auto again = train_classifier(X, y, {});
    CHECK(again.weights == clf.weights);
    CHECK(again.biases == clf.biases);
}

TEST_CASE("zero epochs predicts the first class") {
    const std::vector<std::vector<double>> X = {{1, 0}, {0, 1}, {-1, -1}};
    const std::vector<int> y = {2, 0, 1};
    ClassifierConfig cfg;
    cfg.epochs = 0;
    const auto clf = train_classifier(X, y, cfg);
    for (const auto& row : clf.weights)
        for (double w : row) CHECK(w == 0.0);
    CHECK(clf.predict_all(X) == std::vector<int>{0, 0, 0});
}

TEST_CASE("classifier preconditions") {
    CHECK_THROWS_AS(train_classifier({{1}, {2}}, {1, 1}, {}), PreconditionError);
    CHECK_THROWS_AS(train_classifier({{1, 2}, {2}}, {0, 1}, {}), PreconditionError);
    CHECK_THROWS_AS(train_classifier({{1}}, {0, 1}, {}), PreconditionError);
    const auto clf = train_classifier({{1, 0}, {0, 1}}, {0, 1}, {});
    CHECK_THROWS_AS(clf.predict(std::vector<double>{1, 0, 0}), PreconditionError);
}

TEST_CASE("metrics worked example") {
    const std::vector<int> gold = {L, L, R, R}, pred = {L, R, R, R};
    const auto r = compute_metrics(pred, gold);
    CHECK(r.classes == std::vector<int>{L, R});
    CHECK(r.accuracy == 0.75);
    CHECK(r.precision[0] == 1.0);
    CHECK(r.precision[1] == doctest::Approx(2.0 / 3.0));
    CHECK(r.recall[0] == 0.5);
    CHECK(r.recall[1] == 1.0);
    CHECK(r.f1[0] == doctest::Approx(2.0 / 3.0));
    CHECK(r.f1[1] == doctest::Approx(0.8));
    CHECK(r.f1_macro == doctest::Approx(0.7333).epsilon(1e-4));
    CHECK(r.f1_micro == doctest::Approx(0.75));
    CHECK(r.confusion == std::vector<std::vector<std::size_t>>{{1, 1}, {0, 2}});
    CHECK(r.support == std::vector<std::size_t>{2, 2});

    const auto perfect = compute_metrics(gold, gold);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.f1_macro == 1.0);
    CHECK(perfect.precision_macro == 1.0);
    CHECK(perfect.recall_macro == 1.0);
}

TEST_CASE("class never predicted gets zero precision and is flagged") {
    const std::vector<int> gold = {0, 1, 2}, pred = {0, 0, 2};
    const auto r = compute_metrics(pred, gold);
    CHECK(r.precision[1] == 0.0);
    CHECK(r.undefined_precision == std::vector<int>{1});
    CHECK(r.undefined_recall.empty());
    const std::vector<int> classes = {0, 1, 2, 3};
    const auto wide = compute_metrics(pred, gold, classes);
    CHECK(wide.undefined_recall == std::vector<int>{3});
    CHECK_THROWS_AS(compute_metrics(std::vector<int>{0}, std::vector<int>{0, 1}), PreconditionError);
    CHECK_THROWS_AS(compute_metrics(std::vector<int>{}, std::vector<int>{}), PreconditionError);
}

TEST_CASE("metrics agree with the counting oracle") {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.below(60);
        const int nc = 2 + static_cast<int>(rng.below(4));
        std::vector<int> pred(n), gold(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = static_cast<int>(rng.below(nc));
            gold[i] = static_cast<int>(rng.below(nc));
        }
        const auto r = compute_metrics(pred, gold);
        const auto o = oracle::metrics(pred, gold, r.classes);
        CHECK(oracle::rel_err(r.accuracy, o.accuracy) <= 1e-12);
        CHECK(oracle::rel_err(r.precision_macro, o.precision_macro) <= 1e-12);
        CHECK(oracle::rel_err(r.recall_macro, o.recall_macro) <= 1e-12);
        CHECK(oracle::rel_err(r.f1_macro, o.f1_macro) <= 1e-12);
        CHECK(oracle::rel_err(r.f1_micro, o.f1_micro) <= 1e-12);
        CHECK(r.f1_micro == doctest::Approx(r.accuracy).epsilon(1e-12));
        std::size_t trace = 0;
        for (std::size_t g = 0; g < r.classes.size(); ++g) {
            std::size_t row = 0;
            for (std::size_t p = 0; p < r.classes.size(); ++p) row += r.confusion[g][p];
            CHECK(row == r.support[g]);
            trace += r.confusion[g][g];
        }
        CHECK(static_cast<double>(trace) / n == doctest::Approx(r.accuracy));
    }
}

TEST_CASE("frontier rows follow the mu list and match direct retrieval") {
    Rng rng(6);
    const auto items = pool(rng, 25);
    std::vector<std::vector<double>> queries;
    for (int i = 0; i < 4; ++i) {
        Vector q(4);
        for (double& x : q) x = rng.normal();
        queries.push_back(q);
    }
    const std::vector<double> mus = {0.1, 0.5, 0.9};
    const RetrievalConfig tmpl{5, 0.5, 0.5};
    const auto rows = frontier_sweep(items, queries, mus, tmpl);
    REQUIRE(rows.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(rows[i].mu == mus[i]);
        double s = 0, d = 0;
        for (const auto& q : queries) {
            const auto r = greedy_dkmips(items, q, {5, 0.5, mus[i]});
            s += r.sim;
            d += r.div;
        }
        CHECK(rows[i].mean_sim == doctest::Approx(s / 4));
        CHECK(rows[i].mean_div == doctest::Approx(d / 4));
    }
    const auto threaded = frontier_sweep(items, queries, mus, tmpl, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(threaded[i].mean_sim == rows[i].mean_sim);
        CHECK(threaded[i].mean_div == rows[i].mean_div);
    }
    const auto single = frontier_sweep(items, {queries[0]}, std::vector<double>{0.3}, tmpl);
    const auto direct = greedy_dkmips(items, queries[0], {5, 0.5, 0.3});
    CHECK(single[0].mean_sim == direct.sim);
    CHECK(single[0].mean_div == direct.div);

    CHECK_THROWS_AS(frontier_sweep(items, queries, std::vector<double>{1.0}, tmpl), PreconditionError);
    CHECK_THROWS_AS(frontier_sweep(items, queries, std::vector<double>{}, tmpl), PreconditionError);

    std::stringstream ss;
    write_frontier(ss, rows, "# test");
    std::string line;
    std::getline(ss, line);
    CHECK(line == "# test");
    std::getline(ss, line);
    CHECK(line == "mu\tmean_sim\tmean_div");
    std::getline(ss, line);
    CHECK(line.rfind("0.1\t", 0) == 0);
}

TEST_CASE("spearman with ties") {
    const std::vector<double> a = {1, 2, 3, 4, 5};
    CHECK(spearman(a, std::vector<double>{2, 4, 6, 8, 10}) == doctest::Approx(1.0));
    CHECK(spearman(a, std::vector<double>{5, 4, 3, 2, 1}) == doctest::Approx(-1.0));
    CHECK(spearman(a, std::vector<double>{1, 1, 1, 1, 1}) == 0.0);
    // ranks of y are 1.5, 1.5, 3, 4, 5 and pearson on ranks gives 0.974679...
    CHECK(spearman(a, std::vector<double>{0, 0, 1, 2, 3}) == doctest::Approx(0.9746794344808963));
}
