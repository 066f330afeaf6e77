#include <doctest.h>

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "http_stub.hpp"
#include "prism/encoder.hpp"
#include "prism/error.hpp"
#include "prism/random.hpp"

using namespace prism;
using nlohmann::json;

TEST_CASE("mock encoder is deterministic and unit norm") {
    MockEncoder enc(64, 5);
    const auto a = enc.encode("abc");
    CHECK(a == enc.encode("abc"));
    CHECK(std::abs(norm(a) - 1.0) <= 1e-6);
    MockEncoder twin(64, 5);
    for (const char* t : {"abc", "tax cut now", "Über Straße", "a b c d e f g"})
        CHECK(enc.encode(t) == twin.encode(t));
    CHECK(enc.name() == "mock-64-5");
}

TEST_CASE("mock encoder preconditions") {
    CHECK_THROWS_AS(MockEncoder(7, 0), PreconditionError);
    MockEncoder enc(16, 0);
    CHECK_THROWS_AS(enc.encode(""), PreconditionError);
    CHECK_THROWS_AS(enc.encode("  ,;  "), PreconditionError);
}

TEST_CASE("tax tax cut against tax cut, from the hashed counts") {
    MockEncoder enc(256, 0);
    // rebuild both count vectors by hand from the per-token bucket and sign
    Vector a(256, 0.0), b(256, 0.0);
    for (const char* t : {"tax", "tax", "cut"}) a[enc.bucket(t)] += enc.sign(t);
    for (const char* t : {"tax", "cut"}) b[enc.bucket(t)] += enc.sign(t);
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < 256; ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    const double expected = ab / std::sqrt(aa * bb);
    const double got = cosine(enc.encode("tax tax cut"), enc.encode("tax cut"));
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
    CHECK(got > 0.9);
    if (enc.bucket("tax") != enc.bucket("cut")) CHECK(got == doctest::Approx(3.0 / std::sqrt(10.0)));
}

TEST_CASE("bag-of-tokens invariances") {
    MockEncoder enc(128, 3);
    const std::string s = "senate votes on the border funding bill";
    CHECK(cosine(enc.encode(s), enc.encode(s + " " + s)) == doctest::Approx(1.0).epsilon(1e-6));
    const auto p = enc.encode("bill funding border the on votes senate");
    const auto q = enc.encode(s);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-15));
}

TEST_CASE("fully cancelled counts still give a unit vector") {
    // find two tokens sharing a bucket with opposite signs
    MockEncoder enc(8, 1);
    std::string t1, t2;
    for (int i = 0; i < 200 && t2.empty(); ++i)
        for (int j = i + 1; j < 200; ++j) {
            const std::string a = "w" + std::to_string(i), b = "w" + std::to_string(j);
            if (enc.bucket(a) == enc.bucket(b) && enc.sign(a) != enc.sign(b)) {
                t1 = a;
                t2 = b;
                break;
            }
        }
    REQUIRE_FALSE(t2.empty());
    const auto v = enc.encode(t1 + " " + t2);
    CHECK(std::abs(norm(v) - 1.0) <= 1e-12);
    CHECK(v == enc.encode(t2 + " " + t1));
}

TEST_CASE("texts with disjoint tokens are nearly orthogonal") {
    // 1,000 random disjoint pairs over random seeds
    Rng rng(2024);
    auto word = [&] {
        std::string w;
        for (int i = 0; i < 6; ++i) w += static_cast<char>('a' + rng.below(26));
        return w;
    };
    int below = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        MockEncoder enc(256, rng.next());
        std::string a, b;
        for (int i = 0; i < 8; ++i) a += word() + "x ";
        for (int i = 0; i < 8; ++i) b += word() + "y ";
        below += std::abs(cosine(enc.encode(a), enc.encode(b))) < 0.5;
    }
    MESSAGE("disjoint pairs with |cos| < 0.5: " << below << "/1000");
    CHECK(below >= 990);
}

TEST_CASE("embedding table round trip and file provider") {
    const std::string text = "dim=4 config=abc\na\t1,0,0,0\nb\t0,3,0,4\n";
    std::istringstream in(text);
    const auto table = read_embedding_table(in);
    CHECK(table.dim == 4);
    CHECK(table.header.at("config") == "abc");
    FileEncoder enc(table);
    CHECK(enc.keyed_by_id());
    CHECK(enc.encode_id("a") == Vector{1, 0, 0, 0});
    const auto b = enc.encode_id("b");
    CHECK(b[1] == doctest::Approx(0.6));
    CHECK(b[3] == doctest::Approx(0.8));
    CHECK_THROWS_AS(enc.encode_id("z"), LookupError);
    CHECK_THROWS_AS(enc.encode("some text"), ProviderError);

    std::ostringstream out;
    write_embedding_table(out, table);
    std::istringstream again(out.str());
    const auto back = read_embedding_table(again);
    CHECK(back.vectors == table.vectors);
    CHECK(back.ids == table.ids);
}

TEST_CASE("embedding table with mixed dims fails to load") {
    std::istringstream in("dim=4\na\t1,0,0,0\nb\t1,0,0,0,0,0,0,0\n");
    CHECK_THROWS_AS(read_embedding_table(in), ParseError);
    CHECK_THROWS_AS(load_embedding_table("/nonexistent/table.tsv"), MissingInputError);
}

TEST_CASE("remote encoder speaks the texts/vectors protocol") {
    HttpStub stub("/encode", [](const httplib::Request& req, httplib::Response& res) {
        const auto body = json::parse(req.body);
        json vecs = json::array();
        for (const auto& t : body.at("texts")) {
            const double n = static_cast<double>(t.get<std::string>().size());
            vecs.push_back({n, 1.0, 0.0, 0.0});
        }
        res.set_content(json{{"vectors", vecs}}.dump(), "application/json");
    });
    RemoteEncoder enc({"127.0.0.1", stub.port(), "/encode", 5.0}, 4);
    const auto v = enc.encode("abc");
    CHECK(v[0] == doctest::Approx(3.0 / std::sqrt(10.0)));
    CHECK(std::abs(norm(v) - 1.0) <= 1e-12);
    const std::vector<std::string> texts{"a", "bb"};
    CHECK(enc.encode_batch(texts).size() == 2);
}

TEST_CASE("remote encoder failures carry the retriable flag") {
    SUBCASE("server error is retriable") {
        HttpStub stub("/encode", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
        RemoteEncoder enc({"127.0.0.1", stub.port(), "/encode", 5.0}, 4);
        try {
            enc.encode("x");
            FAIL("expected a provider error");
        } catch (const ProviderError& e) {
            CHECK(e.retriable());
        }
    }
    SUBCASE("wrong dimension is not retriable") {
        HttpStub stub("/encode", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"vectors": [[1, 0]]})", "application/json");
        });
        RemoteEncoder enc({"127.0.0.1", stub.port(), "/encode", 5.0}, 4);
        try {
            enc.encode("x");
            FAIL("expected a provider error");
        } catch (const ProviderError& e) {
            CHECK_FALSE(e.retriable());
        }
    }
    SUBCASE("nothing listening is retriable") {
        RemoteEncoder enc({"127.0.0.1", closed_port(), "/encode", 1.0}, 4);
        try {
            enc.encode("x");
            FAIL("expected a provider error");
        } catch (const ProviderError& e) {
            CHECK(e.retriable());
        }
    }
}
