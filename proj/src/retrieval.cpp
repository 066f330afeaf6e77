#include "prism/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "prism/error.hpp"

namespace prism {

void validate(const RetrievalConfig& config, std::size_t pool_size) {
    if (config.k < 1) throw PreconditionError("retrieval needs k >= 1");
    if (config.k > pool_size)
        throw PreconditionError("retrieval k=" + std::to_string(config.k) + " exceeds pool of " +
                                std::to_string(pool_size));
    if (!(config.lambda_retrieval >= 0.0 && config.lambda_retrieval <= 1.0))
        throw PreconditionError("retrieval lambda must lie in [0, 1]");
    if (!(config.mu > 0.0 && config.mu < 1.0)) throw PreconditionError("mu must lie in (0, 1)");
}

double relevance_coefficient(const RetrievalConfig& config) {
    return config.lambda_retrieval / static_cast<double>(config.k);
}

double diversity_coefficient(const RetrievalConfig& config) {
    if (config.k < 2) return 0.0;
    const double k = static_cast<double>(config.k);
    return 2.0 * config.mu * (1.0 - config.lambda_retrieval) / (k * (k - 1.0));
}

double sim(std::span<const DualSpaceItem> set, std::span<const double> query) {
    if (set.empty()) throw PreconditionError("Sim of an empty set");
    double s = 0.0;
    for (const auto& item : set) s += dot(item.rel_vec, query);
    return s / static_cast<double>(set.size());
}

double div(std::span<const DualSpaceItem> set) {
    if (set.size() < 2) throw PreconditionError("Div needs at least two items");
    double s = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i)
        for (std::size_t j = i + 1; j < set.size(); ++j)
            s += std::abs(static_cast<double>(set[i].rating - set[j].rating));
    const double k = static_cast<double>(set.size());
    return 2.0 * s / (k * (k - 1.0));
}

double objective_f(std::span<const DualSpaceItem> set, std::span<const double> query,
                   const RetrievalConfig& config) {
    if (set.size() != config.k)
        throw PreconditionError("objective needs exactly k=" + std::to_string(config.k) +
                                " items, got " + std::to_string(set.size()));
    double rel = 0.0;
    for (const auto& item : set) rel += dot(item.rel_vec, query);
    double pairs = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i)
        for (std::size_t j = i + 1; j < set.size(); ++j)
            pairs += dot(set[i].div_vec, set[j].div_vec);
    return relevance_coefficient(config) * rel - diversity_coefficient(config) * pairs;
}

namespace {

void check_pool(std::span<const DualSpaceItem> pool, std::span<const double> query) {
    if (pool.empty()) throw PreconditionError("empty retrieval pool");
    const std::size_t rel = pool.front().rel_vec.size();
    const std::size_t dv = pool.front().div_vec.size();
    if (query.size() != rel) throw PreconditionError("query dimension differs from the pool");
    for (const auto& item : pool)
        if (item.rel_vec.size() != rel || item.div_vec.size() != dv)
            throw PreconditionError("pool items differ in dimension");
}

// Scores a finished selection in pool order so equal sets give equal values.
void finish(RetrievalResult& r, std::span<const DualSpaceItem> pool, std::span<const double> query,
            const RetrievalConfig& config) {
    std::vector<std::size_t> sorted = r.indices;
    std::sort(sorted.begin(), sorted.end());
    std::vector<DualSpaceItem> chosen;
    chosen.reserve(sorted.size());
    for (std::size_t i : sorted) chosen.push_back(pool[i]);
    r.ids.clear();
    for (std::size_t i : r.indices) r.ids.push_back(pool[i].id);
    r.sim = sim(chosen, query);
    r.div = chosen.size() >= 2 ? div(chosen) : 0.0;
    r.f = objective_f(chosen, query, config);
}

}  // namespace

RetrievalResult greedy_dkmips(std::span<const DualSpaceItem> pool, std::span<const double> query,
                              const RetrievalConfig& config) {
    validate(config, pool.size());
    check_pool(pool, query);
    const std::size_t n = pool.size();
    const double rel_c = relevance_coefficient(config);
    const double div_c = diversity_coefficient(config);

    std::vector<double> relevance(n);
    for (std::size_t i = 0; i < n; ++i) relevance[i] = dot(pool[i].rel_vec, query);
    // pair_sum[i] = sum over the current selection of <p^_i, p^_s>
    std::vector<double> pair_sum(n, 0.0);
    std::vector<bool> taken(n, false);

    RetrievalResult r;
    for (std::size_t step = 0; step < config.k; ++step) {
        std::size_t best = n;
        double best_gain = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            const double gain = rel_c * relevance[i] - div_c * pair_sum[i];
            if (gain > best_gain) {
                best_gain = gain;
                best = i;
            }
        }
        taken[best] = true;
        r.indices.push_back(best);
        r.step_gains.push_back(best_gain);
        for (std::size_t i = 0; i < n; ++i)
            if (!taken[i]) pair_sum[i] += dot(pool[i].div_vec, pool[best].div_vec);
    }
    finish(r, pool, query, config);
    return r;
}

RetrievalResult brute_force_dkmips(std::span<const DualSpaceItem> pool,
                                   std::span<const double> query, const RetrievalConfig& config) {
    validate(config, pool.size());
    check_pool(pool, query);
    const std::size_t n = pool.size();
    const std::size_t k = config.k;

    double subsets = 1.0;
    for (std::size_t i = 0; i < k; ++i)
        subsets = subsets * static_cast<double>(n - i) / static_cast<double>(i + 1);
    if (subsets > 1e6 + 0.5)
        throw PreconditionError("brute force would enumerate " + std::to_string(subsets) +
                                " subsets (limit 1e6); use a smaller pool or k");

    std::vector<std::size_t> combo(k);
    for (std::size_t i = 0; i < k; ++i) combo[i] = i;
    std::vector<DualSpaceItem> chosen(k);
    std::vector<std::size_t> best;
    std::vector<std::string> best_ids;
    double best_f = -std::numeric_limits<double>::infinity();

    while (true) {
        for (std::size_t i = 0; i < k; ++i) chosen[i] = pool[combo[i]];
        const double f = objective_f(chosen, query, config);
        bool take = f > best_f;
        if (f == best_f) {
            std::vector<std::string> ids;
            for (std::size_t i : combo) ids.push_back(pool[i].id);
            std::sort(ids.begin(), ids.end());
            take = ids < best_ids;
        }
        if (take) {
            best_f = f;
            best = combo;
            best_ids.clear();
            for (std::size_t i : combo) best_ids.push_back(pool[i].id);
            std::sort(best_ids.begin(), best_ids.end());
        }
        // next combination in lexicographic order
        std::size_t i = k;
        while (i > 0 && combo[i - 1] == n - k + (i - 1)) --i;
        if (i == 0) break;
        ++combo[i - 1];
        for (std::size_t j = i; j < k; ++j) combo[j] = combo[j - 1] + 1;
    }

    RetrievalResult r;
    r.indices = best;
    finish(r, pool, query, config);
    return r;
}

}  // namespace prism
