#include <doctest.h>

#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "http_stub.hpp"
#include "oracles.hpp"
#include "prism/cross_encoder.hpp"
#include "prism/error.hpp"
#include "prism/random.hpp"

using namespace prism;

namespace {

std::vector<std::vector<double>> rows_of(const BilinearScorer& s) {
    std::vector<std::vector<double>> W(s.dim(), std::vector<double>(s.dim()));
    for (std::size_t i = 0; i < s.dim(); ++i)
        for (std::size_t j = 0; j < s.dim(); ++j) W[i][j] = s.w(i, j);
    return W;
}

BilinearScorer random_scorer(Rng& rng, std::size_t dim, double scale) {
    BilinearScorer s(dim);
    std::vector<double> p(s.parameter_count());
    for (double& x : p) x = scale * rng.normal();
    s.set_parameters(p);
    return s;
}

Vector unit(Rng& rng, std::size_t dim) {
    Vector v(dim);
    for (double& x : v) x = rng.normal();
    normalize(v);
    return v;
}

// Three clusters of four articles (ratings -2, 0, 2, 1), one topic each.
struct Fixture {
    Corpus corpus;
    std::vector<ControversialCluster> clusters;
    std::vector<Topic> topics;
};

Fixture fixture() {
    Fixture f;
    const int ratings[] = {-2, 0, 2, 1};
    for (std::size_t c = 0; c < 3; ++c) {
        ControversialCluster cl{c * 10, {}, 2.0};
        for (int i = 0; i < 4; ++i) {
            const std::string id = "c" + std::to_string(c) + "a" + std::to_string(i);
            f.corpus.articles.push_back({id, "article text " + id, ratings[i], std::nullopt});
            cl.member_ids.push_back(id);
        }
        f.clusters.push_back(cl);
        f.topics.push_back({static_cast<int>(c) + 100, "topic " + std::to_string(c), "left view",
                            "right view", c * 10});
    }
    f.corpus.articles.push_back({"loner", "not clustered", -2, std::nullopt});
    return f;
}

}  // namespace

TEST_CASE("weak label table") {
    // in-cluster: Left pairs with the left indicator, Right with the right one
    const std::map<std::tuple<BiasClass, Side, Origin>, double> table = {
        {{BiasClass::Left, Side::LeftIndicator, Origin::InCluster}, 1.0},
        {{BiasClass::Left, Side::RightIndicator, Origin::InCluster}, 0.0},
        {{BiasClass::Center, Side::LeftIndicator, Origin::InCluster}, 0.0},
        {{BiasClass::Center, Side::RightIndicator, Origin::InCluster}, 0.0},
        {{BiasClass::Right, Side::LeftIndicator, Origin::InCluster}, 0.0},
        {{BiasClass::Right, Side::RightIndicator, Origin::InCluster}, 1.0},
        {{BiasClass::Left, Side::LeftIndicator, Origin::OutOfCluster}, 0.0},
        {{BiasClass::Left, Side::RightIndicator, Origin::OutOfCluster}, 0.0},
        {{BiasClass::Center, Side::LeftIndicator, Origin::OutOfCluster}, 0.0},
        {{BiasClass::Center, Side::RightIndicator, Origin::OutOfCluster}, 0.0},
        {{BiasClass::Right, Side::LeftIndicator, Origin::OutOfCluster}, 0.0},
        {{BiasClass::Right, Side::RightIndicator, Origin::OutOfCluster}, 0.0},
    };
    REQUIRE(table.size() == 12);
    for (const auto& [key, want] : table) {
        const auto [b, s, o] = key;
        CHECK(weak_label(b, s, o) == want);
    }
}

TEST_CASE("weak pairs per article and their labels") {
    const auto f = fixture();
    for (std::size_t neg : {0u, 1u, 2u, 5u}) {
        const auto pairs = generate_weak_labels(f.corpus, f.clusters, f.topics, neg, 9);
        const std::size_t per = 2 + 2 * std::min<std::size_t>(neg, 2);
        CHECK(pairs.size() == 12 * per);
        std::map<std::string, std::vector<WeakPair>> by_article;
        for (const auto& p : pairs) by_article[p.article_id].push_back(p);
        CHECK_FALSE(by_article.contains("loner"));
        for (const auto& [id, ps] : by_article) {
            REQUIRE(ps.size() == per);
            const Article* a = nullptr;
            for (const auto& x : f.corpus.articles)
                if (x.id == id) a = &x;
            const BiasClass cls = rating_to_class(a->rating, f.corpus.scale);
            const int own = 100 + (id[1] - '0');
            std::set<int> negatives;
            for (const auto& p : ps) {
                CHECK(p.label == weak_label(cls, p.side, p.origin));
                if (p.origin == Origin::InCluster) CHECK(p.topic_id == own);
                else {
                    CHECK(p.topic_id != own);
                    negatives.insert(p.topic_id);
                }
            }
            CHECK(negatives.size() == std::min<std::size_t>(neg, 2));
        }
    }
    const auto a = generate_weak_labels(f.corpus, f.clusters, f.topics, 1, 4);
    const auto b = generate_weak_labels(f.corpus, f.clusters, f.topics, 1, 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].topic_id == b[i].topic_id);
}

TEST_CASE("weak labels reject a cluster without a topic") {
    auto f = fixture();
    f.topics.pop_back();
    CHECK_THROWS_AS(generate_weak_labels(f.corpus, f.clusters, f.topics, 1, 0), ValidationError);
}

TEST_CASE("zero scorer scores one half") {
    auto enc = std::make_shared<MockEncoder>(32, 1);
    BilinearScorer s(32, enc);
    CHECK(s.score("the tax cut", "lower taxes") == 0.5);
    CHECK(s.score("anything at all", "x") == 0.5);
    CHECK_THROWS_AS(s.score("", "x"), PreconditionError);
    CHECK_THROWS_AS(BilinearScorer(16, enc), PreconditionError);
}

TEST_CASE("scores stay strictly inside the unit interval") {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const auto s = random_scorer(rng, 6, trial < 100 ? 1.0 : 1e4);
        const Vector a = unit(rng, 6), b = unit(rng, 6);
        const double got = s.score_vectors(a, b);
        CHECK(got > 0.0);
        CHECK(got < 1.0);
        CHECK(got == s.score_vectors(a, b));
        if (trial < 100) CHECK(oracle::rel_err(got, oracle::bilinear(rows_of(s), s.u(), s.v(), s.c(), a, b)) <= 1e-9);
    }
    CHECK(open_sigmoid(1e6) < 1.0);
    CHECK(open_sigmoid(-1e6) > 0.0);
}

TEST_CASE("analytic gradient agrees with finite differences") {
    Rng rng(33);
    for (int trial = 0; trial < 20; ++trial) {
        const auto s = random_scorer(rng, 8, 0.3);
        const Vector a = unit(rng, 8), b = unit(rng, 8);
        CHECK(gradient_check(s, a, b, trial % 2 ? 1.0 : 0.0, 1e-5) < 1e-4);
    }
    BilinearScorer zero(8);
    CHECK_THROWS_AS(gradient_check(zero, unit(rng, 8), unit(rng, 8), 1.0, 1e-2), PreconditionError);
    CHECK_THROWS_AS(gradient_check(zero, unit(rng, 8), unit(rng, 8), 1.0, 1e-8), PreconditionError);
}

TEST_CASE("W gradient is an outer product at zero init") {
    Rng rng(5);
    BilinearScorer s(6);
    const Vector a = unit(rng, 6), b = unit(rng, 6);
    const auto g = pair_gradient(s, a, b, 1.0);
    // d/dz (sigma(z) - y)^2 at z = 0, y = 1: 2 * (0.5 - 1) * 0.25
    const double scalar = -0.25;
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) CHECK(g[i * 6 + j] == doctest::Approx(scalar * a[i] * b[j]));
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(g[36 + i] == doctest::Approx(scalar * a[i]));
        CHECK(g[42 + i] == doctest::Approx(scalar * b[i]));
    }
    CHECK(g[48] == doctest::Approx(scalar));
    CHECK(pair_loss(s, a, b, 1.0) == 0.25);
}

TEST_CASE("toy separable training") {
    // left article aligned with the left indicator, right article with the right one
    TrainingSet set;
    set.vectors = {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}};
    const Vector ll = {0.8, 0, 0.6, 0}, rr = {0, 0.8, 0, 0.6};
    set.vectors[0] = ll;  // left article
    set.vectors[1] = rr;  // right article
    set.vectors[2] = {1, 0, 0, 0};  // left indicator
    set.vectors[3] = {0, 1, 0, 0};  // right indicator
    set.examples = {{0, 2, 1.0}, {0, 3, 0.0}, {1, 2, 0.0}, {1, 3, 1.0}};
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.batch_size = 4;
    cfg.epochs = 500;
    cfg.seed = 1;
    const auto r = train(BilinearScorer(4), set, cfg);
    REQUIRE(r.loss_history.size() == 500);
    CHECK(r.initial_loss == 0.25);
    CHECK(r.loss_history.back() < r.initial_loss);
    for (std::size_t i = 1; i < r.loss_history.size(); ++i)
        CHECK(r.loss_history[i] <= r.loss_history[i - 1] + 1e-15);
    CHECK(r.scorer.score_vectors(ll, set.vectors[2]) > r.scorer.score_vectors(ll, set.vectors[3]));
    CHECK(r.scorer.score_vectors(rr, set.vectors[3]) > r.scorer.score_vectors(rr, set.vectors[2]));

    const auto again = train(BilinearScorer(4), set, cfg);
    CHECK(again.scorer.parameters() == r.scorer.parameters());

    cfg.epochs = 0;
    const auto none = train(BilinearScorer(4), set, cfg);
    CHECK(none.loss_history.empty());
    CHECK(none.scorer.parameters() == BilinearScorer(4).parameters());
}

TEST_CASE("frozen-bias scorer loss has a closed form") {
    Rng rng(2);
    TrainingSet set;
    for (int i = 0; i < 10; ++i) set.vectors.push_back(unit(rng, 5));
    for (int i = 0; i < 30; ++i) set.examples.push_back({rng.below(10), rng.below(10), rng.below(2) ? 1.0 : 0.0});
    BilinearScorer s(5);
    s.c() = 0.7;
    double want = 0;
    for (const auto& ex : set.examples) {
        const double d = oracle::sigmoid(0.7) - ex.label;
        want += d * d;
    }
    want /= 30.0;
    CHECK(oracle::rel_err(mean_loss(s, set), want) <= 1e-12);
}

TEST_CASE("training errors") {
    TrainingSet set;
    CHECK_THROWS_AS(train(BilinearScorer(2), set, TrainConfig{}), PreconditionError);
    // the W update a_i * b_j overflows a double
    set.vectors = {{1e200, 0}, {0, 1e200}};
    set.examples = {{0, 1, 1.0}};
    TrainConfig cfg;
    cfg.learning_rate = 1.0;
    cfg.epochs = 3;
    try {
        train(BilinearScorer(2), set, cfg);
        FAIL("expected overflow");
    } catch (const TrainingError& e) {
        CHECK(e.step() == 0);
    }
}

TEST_CASE("training through the pair list uses the corpus and topic texts") {
    const auto f = fixture();
    auto enc = std::make_shared<MockEncoder>(16, 0);
    const auto pairs = generate_weak_labels(f.corpus, f.clusters, f.topics, 1, 0);
    TrainConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.epochs = 5;
    const auto r = train(BilinearScorer(16, enc), pairs, f.topics, f.corpus, cfg);
    CHECK(r.loss_history.size() == 5);
    CHECK(r.loss_history.back() < r.initial_loss);
    CHECK(gradient_check(r.scorer, pairs.front(), f.corpus, f.topics, 1e-5) < 1e-4);
}

TEST_CASE("checkpoint and weak pair files round trip") {
    Rng rng(8);
    auto s = random_scorer(rng, 5, 1.0);
    std::stringstream ss;
    write_checkpoint(ss, s, "config=abc");
    std::string extra;
    const auto back = read_checkpoint(ss, &extra);
    CHECK(extra == "config=abc");
    CHECK(back.parameters() == s.parameters());

    std::stringstream bad("dim=2\n1,2\n");
    CHECK_THROWS_AS(read_checkpoint(bad), ParseError);

    const auto f = fixture();
    const auto pairs = generate_weak_labels(f.corpus, f.clusters, f.topics, 2, 1);
    std::stringstream ps;
    write_weak_pairs(ps, pairs, "{\"k\":1}");
    std::string meta;
    const auto pb = read_weak_pairs(ps, &meta);
    CHECK(meta == "{\"k\":1}");
    REQUIRE(pb.size() == pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(pb[i].article_id == pairs[i].article_id);
        CHECK(pb[i].topic_id == pairs[i].topic_id);
        CHECK(pb[i].side == pairs[i].side);
        CHECK(pb[i].label == pairs[i].label);
        CHECK(pb[i].origin == pairs[i].origin);
    }
    std::stringstream badpair("{\"article_id\":\"a\",\"topic_id\":1,\"side\":\"up\",\"label\":1,\"origin\":\"in_cluster\"}\n");
    CHECK_THROWS_AS(read_weak_pairs(badpair), ParseError);
}

TEST_CASE("remote scorer protocol") {
    using nlohmann::json;
    SUBCASE("scores are returned in order") {
        HttpStub stub("/score", [](const httplib::Request& req, httplib::Response& res) {
            const auto body = json::parse(req.body);
            json scores = json::array();
            for (const auto& p : body["pairs"])
                scores.push_back(p[0].get<std::string>().size() > p[1].get<std::string>().size() ? 0.9 : 0.2);
            res.set_content(json{{"scores", scores}}.dump(), "application/json");
        });
        RemoteScorer s({"127.0.0.1", stub.port(), "/score", 5.0});
        CHECK(s.score("long article", "short") == 0.9);
        CHECK(s.score_batch({{"a", "bbb"}, {"cccc", "d"}}) == std::vector<double>{0.2, 0.9});
    }
    SUBCASE("out of range score") {
        HttpStub stub("/score", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("{\"scores\":[1.0]}", "application/json");
        });
        RemoteScorer s({"127.0.0.1", stub.port(), "/score", 5.0});
        try {
            s.score("a", "b");
            FAIL("expected provider error");
        } catch (const ProviderError& e) {
            CHECK_FALSE(e.retriable());
        }
    }
    SUBCASE("unavailable service is retriable") {
        RemoteScorer s({"127.0.0.1", closed_port(), "/score", 1.0});
        try {
            s.score("a", "b");
            FAIL("expected provider error");
        } catch (const ProviderError& e) {
            CHECK(e.retriable());
        }
    }
}
