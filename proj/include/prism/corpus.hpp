#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace prism {

// Media-bias rating scale of a corpus.
//   FivePoint:  -2 Left, -1 Lean Left, 0 Center, 1 Lean Right, 2 Right
//   ThreePoint: -1 Left,  0 Center,    1 Right
enum class Scale { FivePoint, ThreePoint };

enum class BiasClass { Left = 0, Center = 1, Right = 2 };

struct Article {
    std::string id;
    std::string text;
    int rating = 0;
    std::optional<std::string> source;
};

struct Corpus {
    std::vector<Article> articles;
    Scale scale = Scale::FivePoint;

    std::size_t size() const { return articles.size(); }
    bool empty() const { return articles.empty(); }
};

int scale_min(Scale scale);
int scale_max(Scale scale);
bool rating_in_scale(int rating, Scale scale);

std::string_view to_string(Scale scale);
Scale parse_scale(std::string_view name);
std::string_view to_string(BiasClass cls);

// AllSides-style label of a rating, e.g. "Lean Left".
std::string_view rating_label(int rating, Scale scale);

BiasClass rating_to_class(int rating, Scale scale);

// Checks id uniqueness, non-empty text and rating bounds.
void validate(const Corpus& corpus);

// Newline-delimited JSON records {"id","text","rating","source"?}. A leading
// {"_meta": {...}} record is skipped; its contents are returned through meta.
Corpus read_corpus(std::istream& in, Scale scale, std::string* meta_json = nullptr);
Corpus load_corpus(const std::string& path, Scale scale, std::string* meta_json = nullptr);

void write_corpus(std::ostream& out, const Corpus& corpus, std::string_view meta_json = {});
void save_corpus(const std::string& path, const Corpus& corpus, std::string_view meta_json = {});

// Seeded shuffle then contiguous partitions. Partition sizes are
// floor(fraction * n); the rounding remainder goes to the first partition.
std::vector<Corpus> split_corpus(const Corpus& corpus, const std::vector<double>& fractions,
                                 std::uint64_t seed);

}  // namespace prism
