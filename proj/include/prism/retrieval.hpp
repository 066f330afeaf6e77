#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "prism/embedding.hpp"
#include "prism/encoder.hpp"

namespace prism {

// A retrieval candidate seen from two spaces: rel_vec scores relevance to the
// query, div_vec measures political similarity between candidates. The rating
// is only used by the Div metric.
struct DualSpaceItem {
    std::string id;
    Vector rel_vec;
    std::vector<double> div_vec;
    int rating = 0;
};

struct RetrievalConfig {
    std::size_t k = 10;
    double lambda_retrieval = 0.5;
    double mu = 0.5;
};

struct RetrievalResult {
    std::vector<std::size_t> indices;  // selection order
    std::vector<std::string> ids;
    std::vector<double> step_gains;    // marginal gain at each greedy step
    double sim = 0.0;
    double div = 0.0;
    double f = 0.0;
};

// Sim(S, q) = (1/k) sum <p_i, q>
double sim(std::span<const DualSpaceItem> set, std::span<const double> query);
// Div(S) = 2/(k(k-1)) sum_{i<j} |r_i - r_j|
double div(std::span<const DualSpaceItem> set);

// f(S) = (lambda/k) sum <p_i, q> - (2 mu (1-lambda) / (k(k-1))) sum_{i<j} <p^_i, p^_j>
// Each unordered pair is counted once. |S| must equal config.k.
double objective_f(std::span<const DualSpaceItem> set, std::span<const double> query,
                   const RetrievalConfig& config);

// Coefficients of f at the final set size.
double relevance_coefficient(const RetrievalConfig& config);
double diversity_coefficient(const RetrievalConfig& config);

// Greedy selection: at every step adds the candidate with the largest
// marginal gain of f (constants fixed at the final k); ties go to the
// earlier pool position.
RetrievalResult greedy_dkmips(std::span<const DualSpaceItem> pool, std::span<const double> query,
                              const RetrievalConfig& config);

// Exhaustive maximiser of f over all k-subsets; ties go to the subset whose
// sorted id list is lexicographically smallest. Refuses more than 1e6 subsets.
RetrievalResult brute_force_dkmips(std::span<const DualSpaceItem> pool,
                                   std::span<const double> query, const RetrievalConfig& config);

void validate(const RetrievalConfig& config, std::size_t pool_size);

}  // namespace prism
