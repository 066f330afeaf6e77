#include "prism/synthetic.hpp"

#include <array>
#include <cstdio>
#include <numeric>

#include "prism/error.hpp"
#include "prism/random.hpp"

namespace prism {

namespace {

constexpr std::array<const char*, 8> kTopicTokens = {
    "healthcare", "immigration", "taxation", "climate",
    "firearms",   "education",   "trade",    "policing"};

constexpr std::array<std::array<const char*, 10>, 8> kTopicVocab = {{
    {"hospital", "insurance", "medicaid", "patients", "doctors", "premiums", "coverage",
     "clinics", "nurses", "prescriptions"},
    {"border", "asylum", "visas", "migrants", "deportation", "citizenship", "refugees",
     "wall", "caravan", "amnesty"},
    {"irs", "deductions", "brackets", "revenue", "loopholes", "payroll", "estate", "credits",
     "audits", "levy"},
    {"emissions", "carbon", "warming", "renewables", "drought", "glaciers", "coal", "solar",
     "wildfires", "methane"},
    {"rifles", "ammunition", "background", "checks", "shooting", "holster", "handguns",
     "magazines", "nra", "permits"},
    {"schools", "teachers", "tuition", "students", "curriculum", "charter", "classrooms",
     "loans", "campus", "vouchers"},
    {"tariffs", "imports", "exports", "beijing", "steel", "soybeans", "nafta", "deficit",
     "factories", "supply"},
    {"officers", "precinct", "arrests", "sheriff", "patrol", "bodycams", "misconduct",
     "warrants", "detectives", "jail"},
}};

constexpr std::array<const char*, 16> kFiller = {
    "reported", "officials", "week", "statement", "monday", "analysts", "percent", "city",
    "announced", "plan", "state", "national", "according", "sources", "update", "tuesday"};

}  // namespace

const std::vector<std::string>& planted_topic_tokens() {
    static const std::vector<std::string> tokens(kTopicTokens.begin(), kTopicTokens.end());
    return tokens;
}

std::string planted_stance_token(std::size_t topic, BiasClass cls) {
    if (cls == BiasClass::Center) return "balance";
    const bool flipped = topic % 2 == 1;
    const bool left = cls == BiasClass::Left;
    return (left != flipped) ? "support" : "oppose";
}

PlantedCorpus make_planted_corpus(const PlantedOptions& o) {
    if (o.topics == 0 || o.topics > kTopicTokens.size())
        throw PreconditionError("planted corpus supports 1.." + std::to_string(kTopicTokens.size()) +
                                " topics");
    if (o.left_per_topic == 0 || o.right_per_topic == 0)
        throw PreconditionError("planted corpus needs left and right articles on every topic");
    Rng rng(o.seed);

    struct Draft {
        std::size_t topic;
        BiasClass cls;
    };
    std::vector<Draft> drafts;
    for (std::size_t t = 0; t < o.topics; ++t) {
        for (std::size_t i = 0; i < o.left_per_topic; ++i) drafts.push_back({t, BiasClass::Left});
        for (std::size_t i = 0; i < o.center_per_topic; ++i) drafts.push_back({t, BiasClass::Center});
        for (std::size_t i = 0; i < o.right_per_topic; ++i) drafts.push_back({t, BiasClass::Right});
    }
    rng.shuffle(std::span<Draft>(drafts));

    PlantedCorpus out;
    out.corpus.scale = Scale::FivePoint;
    for (std::size_t n = 0; n < drafts.size(); ++n) {
        const auto [t, cls] = drafts[n];
        std::vector<std::string> words;
        const std::size_t reps = 2 + rng.below(3);
        for (std::size_t i = 0; i < reps; ++i) words.emplace_back(kTopicTokens[t]);
        for (std::size_t i = 0, nv = 4 + rng.below(3); i < nv; ++i)
            words.emplace_back(kTopicVocab[t][rng.below(kTopicVocab[t].size())]);
        for (std::size_t i = 0, nf = 2 + rng.below(3); i < nf; ++i)
            words.emplace_back(kFiller[rng.below(kFiller.size())]);
        const std::string stance = planted_stance_token(t, cls);
        words.push_back(stance);
        words.push_back(stance);
        rng.shuffle(std::span<std::string>(words));

        std::string text;
        for (const auto& w : words) {
            if (!text.empty()) text += ' ';
            text += w;
        }
        int rating = 0;
        if (cls == BiasClass::Left) rating = rng.below(2) == 0 ? -2 : -1;
        if (cls == BiasClass::Right) rating = rng.below(2) == 0 ? 1 : 2;

        char id[32];
        std::snprintf(id, sizeof id, "p%03zu", n);
        out.corpus.articles.push_back(Article{id, text, rating, std::nullopt});
        out.topic_of.push_back(t);
    }
    return out;
}

}  // namespace prism
