#include "prism/corpus.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "prism/error.hpp"
#include "prism/random.hpp"
#include "prism/text.hpp"

namespace prism {

using nlohmann::json;

int scale_min(Scale scale) { return scale == Scale::FivePoint ? -2 : -1; }
int scale_max(Scale scale) { return scale == Scale::FivePoint ? 2 : 1; }

bool rating_in_scale(int rating, Scale scale) {
    return rating >= scale_min(scale) && rating <= scale_max(scale);
}

std::string_view to_string(Scale scale) {
    return scale == Scale::FivePoint ? "five_point" : "three_point";
}

Scale parse_scale(std::string_view name) {
    if (name == "five_point") return Scale::FivePoint;
    if (name == "three_point") return Scale::ThreePoint;
    throw ValidationError("unknown rating scale '" + std::string(name) +
                          "' (expected five_point or three_point)");
}

std::string_view to_string(BiasClass cls) {
    switch (cls) {
        case BiasClass::Left: return "Left";
        case BiasClass::Center: return "Center";
        case BiasClass::Right: return "Right";
    }
    return "?";
}

std::string_view rating_label(int rating, Scale scale) {
    if (!rating_in_scale(rating, scale))
        throw ValidationError("rating " + std::to_string(rating) + " outside " +
                              std::string(to_string(scale)) + " scale");
    if (scale == Scale::ThreePoint) return to_string(rating_to_class(rating, scale));
    static constexpr std::string_view kNames[] = {"Left", "Lean Left", "Center", "Lean Right",
                                                  "Right"};
    return kNames[rating + 2];
}

BiasClass rating_to_class(int rating, Scale scale) {
    if (!rating_in_scale(rating, scale))
        throw ValidationError("rating " + std::to_string(rating) + " outside " +
                              std::string(to_string(scale)) + " scale");
    if (rating < 0) return BiasClass::Left;
    if (rating > 0) return BiasClass::Right;
    return BiasClass::Center;
}

void validate(const Corpus& corpus) {
    std::unordered_set<std::string_view> seen;
    std::string bad_ratings;
    for (const auto& a : corpus.articles) {
        if (!seen.insert(a.id).second)
            throw ValidationError("duplicate article id '" + a.id + "'");
        if (text::trim(a.text).empty())
            throw ValidationError("article '" + a.id + "' has empty text");
        if (!rating_in_scale(a.rating, corpus.scale)) {
            if (!bad_ratings.empty()) bad_ratings += ", ";
            bad_ratings += a.id;
        }
    }
    if (!bad_ratings.empty())
        throw ValidationError("ratings outside the " + std::string(to_string(corpus.scale)) +
                              " scale for ids: " + bad_ratings);
}

Corpus read_corpus(std::istream& in, Scale scale, std::string* meta_json) {
    Corpus corpus;
    corpus.scale = scale;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed corpus record: ") + e.what(), line_no);
        }
        if (!rec.is_object()) throw ParseError("corpus record is not an object", line_no);
        if (rec.contains("_meta")) {
            if (corpus.articles.empty() && meta_json) *meta_json = rec["_meta"].dump();
            continue;
        }
        Article a;
        if (!rec.contains("id") || !rec["id"].is_string())
            throw ParseError("record lacks string field \"id\"", line_no);
        if (!rec.contains("text") || !rec["text"].is_string())
            throw ParseError("record lacks string field \"text\"", line_no);
        if (!rec.contains("rating") || !rec["rating"].is_number_integer())
            throw ParseError("record lacks integer field \"rating\"", line_no);
        a.id = rec["id"].get<std::string>();
        a.text = rec["text"].get<std::string>();
        a.rating = rec["rating"].get<int>();
        if (rec.contains("source") && !rec["source"].is_null()) {
            if (!rec["source"].is_string())
                throw ParseError("field \"source\" must be a string", line_no);
            a.source = rec["source"].get<std::string>();
        }
        for (const auto& [key, _] : rec.items()) {
            if (key != "id" && key != "text" && key != "rating" && key != "source")
                throw ParseError("unknown field \"" + key + "\"", line_no);
        }
        corpus.articles.push_back(std::move(a));
    }
    validate(corpus);
    return corpus;
}

Corpus load_corpus(const std::string& path, Scale scale, std::string* meta_json) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError(path);
    return read_corpus(in, scale, meta_json);
}

void write_corpus(std::ostream& out, const Corpus& corpus, std::string_view meta_json) {
    if (!meta_json.empty()) out << "{\"_meta\":" << meta_json << "}\n";
    for (const auto& a : corpus.articles) {
        json rec = {{"id", a.id}, {"text", a.text}, {"rating", a.rating}};
        if (a.source) rec["source"] = *a.source;
        out << rec.dump() << '\n';
    }
}

void save_corpus(const std::string& path, const Corpus& corpus, std::string_view meta_json) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    write_corpus(out, corpus, meta_json);
}

std::vector<Corpus> split_corpus(const Corpus& corpus, const std::vector<double>& fractions,
                                 std::uint64_t seed) {
    if (corpus.empty()) throw PreconditionError("cannot split an empty corpus");
    if (fractions.empty()) throw PreconditionError("split needs at least one fraction");
    double total = 0.0;
    for (double f : fractions) {
        if (!(f > 0.0)) throw PreconditionError("split fractions must be positive");
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-9) throw PreconditionError("split fractions must sum to 1");

    const std::size_t n = corpus.size();
    std::vector<std::size_t> sizes;
    std::size_t assigned = 0;
    for (double f : fractions) {
        // Nudge before flooring so 0.9 * 10 lands on 9, not 8.
        const auto s = static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
        sizes.push_back(s);
        assigned += s;
    }
    sizes.front() += n - assigned;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));

    std::vector<Corpus> parts;
    std::size_t next = 0;
    for (std::size_t s : sizes) {
        Corpus part;
        part.scale = corpus.scale;
        part.articles.reserve(s);
        for (std::size_t i = 0; i < s; ++i) part.articles.push_back(corpus.articles[order[next++]]);
        parts.push_back(std::move(part));
    }
    return parts;
}

}  // namespace prism
