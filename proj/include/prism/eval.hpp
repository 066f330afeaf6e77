#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "prism/retrieval.hpp"

namespace prism {

// Multinomial logistic regression. Classes are the sorted distinct labels
// seen in training; predict breaks score ties towards the earlier class.
struct LinearClassifier {
    std::vector<int> classes;
    std::vector<std::vector<double>> weights;  // classes x features
    std::vector<double> biases;
    double final_loss = 0.0;

    std::size_t feature_dim() const { return weights.empty() ? 0 : weights.front().size(); }
    std::vector<double> scores(std::span<const double> x) const;
    int predict(std::span<const double> x) const;
    std::vector<int> predict_all(const std::vector<std::vector<double>>& X) const;
};

struct ClassifierConfig {
    std::size_t epochs = 200;
    double learning_rate = 0.5;
    std::size_t batch = 16;
    double l2 = 0.0;
    std::uint64_t seed = 0;
};

LinearClassifier train_classifier(const std::vector<std::vector<double>>& X,
                                  const std::vector<int>& y, const ClassifierConfig& config);
double classifier_loss(const LinearClassifier& clf, const std::vector<std::vector<double>>& X,
                       const std::vector<int>& y);

struct ClassificationReport {
    std::vector<int> classes;
    double accuracy = 0.0;
    double precision_macro = 0.0;
    double recall_macro = 0.0;
    double f1_macro = 0.0;
    double f1_micro = 0.0;
    std::vector<double> precision, recall, f1;
    std::vector<std::size_t> support;
    // confusion[g][p]: gold class g predicted as p
    std::vector<std::vector<std::size_t>> confusion;
    // classes whose precision (never predicted) or recall (never gold) was 0/0
    std::vector<int> undefined_precision;
    std::vector<int> undefined_recall;
};

// Classes default to the sorted union of pred and gold.
ClassificationReport compute_metrics(std::span<const int> pred, std::span<const int> gold,
                                     std::span<const int> classes = {});

struct FrontierRow {
    double mu = 0.0;
    double mean_sim = 0.0;
    double mean_div = 0.0;
};

FrontierRow frontier_point(std::span<const DualSpaceItem> pool,
                           const std::vector<std::vector<double>>& queries,
                           const RetrievalConfig& config);
std::vector<FrontierRow> frontier_sweep(std::span<const DualSpaceItem> pool,
                                        const std::vector<std::vector<double>>& queries,
                                        std::span<const double> mu_values,
                                        const RetrievalConfig& config_template,
                                        std::size_t workers = 1);

// "<header>\nmu\tmean_sim\tmean_div\n" then one row per mu.
void write_frontier(std::ostream& out, const std::vector<FrontierRow>& rows,
                    const std::string& header);

// Spearman rank correlation with average ranks for ties; 0 if either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace prism
