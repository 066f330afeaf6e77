#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prism/corpus.hpp"

namespace prism {

// Planted-topic news corpus on the five-point scale. Every article repeats its
// topic token, mixes in words from the topic vocabulary and a shared filler
// pool, and carries a stance word. Stance words are shared across topics but
// their meaning flips with topic parity: on even topics Left writes "support"
// and Right "oppose", on odd topics the other way round. Center writes
// "balance" everywhere.
struct PlantedOptions {
    std::size_t topics = 6;
    std::size_t left_per_topic = 40;
    std::size_t center_per_topic = 20;
    std::size_t right_per_topic = 40;
    std::uint64_t seed = 7;
};

const std::vector<std::string>& planted_topic_tokens();
// Stance word written by a class on a topic.
std::string planted_stance_token(std::size_t topic, BiasClass cls);

struct PlantedCorpus {
    Corpus corpus;
    std::vector<std::size_t> topic_of;  // parallel to corpus.articles
};

PlantedCorpus make_planted_corpus(const PlantedOptions& options);

}  // namespace prism
