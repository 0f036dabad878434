#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "picm/codec.hpp"
#include "picm/tensor.hpp"

namespace picm {

// Confidence summary of one logit vector, in a fixed order. All logs are
// natural; softmax uses max-subtraction; stds are population stds.
struct FeatureVector {
  double conf_max = 0;       // largest softmax probability
  double conf_std = 0;       // std of the softmax probabilities
  double conf_entropy = 0;   // -sum p ln p
  double conf_ratio = 0;     // top probability over the runner-up
  double top10_sum = 0;      // sum of the top min(10, K) probabilities
  double logit_mean = 0;
  double logit_max = 0;
  double logit_std = 0;
  double logit_delta12 = 0;  // gap between the top two logits
  double loss_pseudo_ce = 0; // -ln conf_max
  double margin_ce = 0;      // ln conf_ratio
  double energy = 0;         // -ln sum e^z

  std::array<double, 12> values() const {
    return {conf_max,   conf_std,  conf_entropy, conf_ratio,     top10_sum, logit_mean,
            logit_max,  logit_std, logit_delta12, loss_pseudo_ce, margin_ce, energy};
  }
};

FeatureVector extract_features(const std::vector<double>& logits);

// Logistic filter over standardized features. A single-class training set
// degenerates to a constant-probability model, flagged.
struct FilterModel {
  std::array<double, 12> weights{};
  double bias = 0;
  std::array<double, 12> feat_mean{};
  std::array<double, 12> feat_std{};
  double regularization = 1e-4;
  uint64_t iterations = 0;
  uint64_t seed = 0;
  bool single_class = false;
  double grad_norm = 0;
};

double predict_confidence(const FilterModel& model, const FeatureVector& f);

struct TrainingSet {
  std::vector<FeatureVector> features;
  std::vector<int> labels;  // 1 when the prediction matched
};

// Full-batch Newton on the L2-regularized logistic loss (bias included in
// the penalty, which keeps the system positive definite) until the gradient
// norm falls to 1e-8 or 1000 iterations.
FilterModel train_filter(const TrainingSet& data, double regularization = 1e-4,
                         uint64_t seed = 0);

void save_filter(const FilterModel& model, const std::string& path);
FilterModel load_filter(const std::string& path);

struct AdaptiveStep {
  uint64_t level = 0;
  uint64_t bytes = 0;
  double p = 0;
  uint32_t prediction = 0;
  bool stop = false;
};

struct AdaptiveResult {
  uint32_t prediction = 0;
  uint64_t level = 0;
  uint64_t bytes = 0;
  std::vector<AdaptiveStep> trace;
};

// First-crossing scan: visit levels in order, stop at the first p >= tau,
// fall back to the last level when none crosses. eval fills bytes, p, and
// prediction for one level.
AdaptiveResult adaptive_scan(const std::vector<uint64_t>& levels, double tau,
                             const std::function<AdaptiveStep(uint64_t)>& eval);

using ClassifierFn = std::function<std::vector<double>(const LatentGrid&)>;

// The scan over real decodes: levels index the stream's cut table.
AdaptiveResult adaptive_decode(const ProgressiveBitstream& bs, const ClassifierFn& classify,
                               const FilterModel& model, double tau,
                               const std::vector<uint64_t>& levels,
                               const DecodeOptions& dopt = {});

// One row per (grid, level): features of the level's reconstruction and
// whether its prediction matches the full-decode label.
TrainingSet build_training_set(const std::vector<LatentGrid>& grids, Strategy strategy,
                               const EncodeOptions& eopt, const ClassifierFn& classify,
                               const std::vector<uint64_t>& levels);

struct PredictionOutcome {
  double p = 0;
  bool correct = false;
};

// Expected calibration error over equal-width bins; empty bins are skipped.
double ece(const std::vector<PredictionOutcome>& outcomes, int bins);

struct RatePoint {
  double rate = 0;
  double accuracy = 0;
};

struct BdSummary {
  double bd_rate_percent = 0;
  double bd_accuracy = 0;
};

// Bjontegaard deltas between two rate-accuracy curves: cubic fits against
// log10 rate, averaged over the overlapping range.
BdSummary bd_metrics(const std::vector<RatePoint>& a, const std::vector<RatePoint>& b);

}  // namespace picm
