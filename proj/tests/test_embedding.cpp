#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "prism/embedding.hpp"
#include "prism/error.hpp"
#include "prism/random.hpp"

using namespace prism;

namespace {

// Fixed scores keyed on the indicator text.
class TableScorer final : public AlignmentScorer {
public:
    TableScorer(double right, double left) : right_(right), left_(left) {}
    std::string name() const override { return "table"; }
    double score(std::string_view, std::string_view indicator) const override {
        return indicator.find("rightward") != std::string_view::npos ? right_ : left_;
    }

private:
    double right_, left_;
};

std::vector<Topic> topics(std::size_t n) {
    const char* words[] = {"tariffs", "schools", "border", "carbon", "rifles", "policing"};
    std::vector<Topic> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back({static_cast<int>(i), std::string(words[i]) + " debate",
                       std::string(words[i]) + " leftward", std::string(words[i]) + " rightward", i});
    return out;
}

BiasEmbedding make(std::size_t dims, std::map<std::size_t, double> entries) {
    return BiasEmbedding{"x", dims, std::move(entries)};
}

}  // namespace

TEST_CASE("zero scorer gives zero entries on every retrieved topic") {
    auto enc = std::make_shared<MockEncoder>(32, 0);
    const auto index = build_index(topics(6), *enc);
    const BilinearScorer zero(32, enc);
    const Article a{"a", "tariffs debate on steel", 1, std::nullopt};
    const auto e = embed_article(a, index, zero, {0.8, 3}, *enc);
    CHECK(e.dims == 6);
    CHECK(e.nonzeros() == 0);
    for (double v : densify(e)) CHECK(v == 0.0);
}

TEST_CASE("right minus left score is the entry") {
    auto enc = std::make_shared<MockEncoder>(32, 0);
    const auto index = build_index(topics(6), *enc);
    const Article a{"a", "tariffs debate tariffs", 1, std::nullopt};
    const ImportanceConfig cfg{0.8, 2};
    const auto e = embed_article(a, index, TableScorer(0.9, 0.1), cfg, *enc);
    const auto top = top_m_topics(enc->encode(a.text), index, cfg);
    REQUIRE(top.size() == 2);
    CHECK(top[0] == 0);
    CHECK(e.nonzeros() == 2);
    for (std::size_t i : top) CHECK(e.entries.at(i) == doctest::Approx(0.8).epsilon(1e-15));
    const auto dense = densify(e);
    for (std::size_t i = 0; i < 6; ++i)
        if (i != top[0] && i != top[1]) CHECK(dense[i] == 0.0);

    const auto left = embed_article(a, index, TableScorer(0.2, 0.7), cfg, *enc);
    CHECK(left.entries.at(top[0]) == doctest::Approx(-0.5));
}

TEST_CASE("bilinear embedding through vectors matches the text path") {
    auto enc = std::make_shared<MockEncoder>(24, 3);
    const auto index = build_index(topics(5), *enc);
    Rng rng(4);
    BilinearScorer s(24, enc);
    std::vector<double> p(s.parameter_count());
    for (double& x : p) x = rng.normal();
    s.set_parameters(p);
    const ImportanceConfig cfg{0.8, 3};
    for (const char* text : {"border wall debate", "carbon carbon tax", "schools rifles"}) {
        const Article a{"id", text, 0, std::nullopt};
        const auto by_text = embed_article(a, index, s, cfg, *enc);
        const auto by_vec = embed_vector("id", enc->encode(text), index, s, cfg);
        CHECK(by_text.entries.size() <= cfg.m);
        REQUIRE(by_text.entries.size() == by_vec.entries.size());
        for (const auto& [pos, v] : by_text.entries) {
            CHECK(by_vec.entries.at(pos) == doctest::Approx(v).epsilon(1e-12));
            CHECK(v > -1.0);
            CHECK(v < 1.0);
            // sign follows which side scores higher
            const double sr = s.score(text, index.topics[pos].right_indicator);
            const double sl = s.score(text, index.topics[pos].left_indicator);
            CHECK((v > 0) == (sr > sl));
            CHECK((v < 0) == (sr < sl));
        }
    }
}

TEST_CASE("dimension mismatches are rejected") {
    auto enc = std::make_shared<MockEncoder>(16, 0);
    auto other = std::make_shared<MockEncoder>(32, 0);
    const auto index = build_index(topics(3), *enc);
    const Article a{"a", "tariffs", 0, std::nullopt};
    CHECK_THROWS_AS(embed_article(a, index, TableScorer(0.5, 0.5), {0.8, 1}, *other), PreconditionError);
    CHECK_THROWS_AS(embed_vector("a", other->encode("x"), index, BilinearScorer(32), {0.8, 1}),
                    PreconditionError);
    CHECK_THROWS_AS(embed_article(a, index, TableScorer(0.5, 0.5), {0.8, 4}, *enc), PreconditionError);
    CHECK_THROWS_AS(dot(make(3, {}), make(4, {})), PreconditionError);
}

TEST_CASE("dot product examples") {
    CHECK(dot(make(5, {{0, 0.3}}), make(5, {{1, 0.9}})) == 0.0);
    CHECK(dot(make(5, {{2, 0.8}}), make(5, {{2, 0.8}})) == doctest::Approx(0.64));
    CHECK(dot(make(5, {{3, 0.5}}), make(5, {{3, -0.5}})) == doctest::Approx(-0.25));
}

TEST_CASE("dot is symmetric, bilinear and positive semidefinite") {
    Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        auto rand_e = [&] {
            BiasEmbedding e{"r", 12, {}};
            for (int k = 0; k < 4; ++k) e.entries[rng.below(12)] = rng.uniform(-1, 1);
            return e;
        };
        const auto a = rand_e(), b = rand_e(), c = rand_e();
        CHECK(dot(a, b) == doctest::Approx(dot(b, a)));
        CHECK(dot(a, a) >= 0.0);
        const double alpha = rng.uniform(-2, 2);
        std::vector<double> mix = densify(a);
        const auto db = densify(b);
        for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = alpha * mix[i] + db[i];
        const auto m = sparsify("m", mix);
        CHECK(dot(m, c) == doctest::Approx(alpha * dot(a, c) + dot(b, c)).epsilon(1e-12));
    }
}

TEST_CASE("densify and sparsify round trip") {
    const auto empty = densify(make(4, {}));
    CHECK(empty == std::vector<double>(4, 0.0));
    const auto one = densify(make(4, {{1, -0.3}}));
    CHECK(std::count_if(one.begin(), one.end(), [](double v) { return v != 0.0; }) == 1);
    const auto e = make(7, {{0, 0.1}, {4, -0.9}, {6, 0.25}});
    const auto back = sparsify("x", densify(e));
    CHECK(back.entries == e.entries);
    CHECK(back.dims == 7);
}

TEST_CASE("embedding file round trip keeps six decimals") {
    EmbeddingFile f{6, 3, "config=abc", {}};
    f.embeddings.push_back(make(6, {{0, 0.1234567}, {5, -0.5}}));
    f.embeddings.back().article_id = "a1";
    f.embeddings.push_back(BiasEmbedding{"a2", 6, {}});
    std::stringstream ss;
    write_embeddings(ss, f);
    const std::string text = ss.str();
    CHECK(text.rfind("dims=6 m=3 config=abc\n", 0) == 0);
    CHECK(text.find("a1\t0:0.123457,5:-0.500000\n") != std::string::npos);
    const auto back = read_embeddings(ss);
    CHECK(back.dims == 6);
    CHECK(back.m == 3);
    CHECK(back.extra_header == "config=abc");
    REQUIRE(back.embeddings.size() == 2);
    CHECK(back.embeddings[0].entries.at(0) == 0.123457);
    CHECK(back.embeddings[1].entries.empty());

    std::stringstream bad("dims=2 m=1\na\t5:0.1\n");
    CHECK_THROWS_AS(read_embeddings(bad), ParseError);
}
