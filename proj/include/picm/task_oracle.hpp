#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace picm {

struct LogitRecord {
  uint64_t sample_id = 0;
  uint32_t level = 0;
  uint32_t label = 0;
  std::vector<double> logits;
};

// Deterministic linear head standing in for a downstream network: a seed
// draws W (classes x dim, entries N(0, 1/dim)) and b (entries N(0, 1)) once,
// then logits(x) = W x + b.
class SynthClassifier {
 public:
  SynthClassifier(uint64_t seed, size_t input_dim, uint32_t classes);

  std::vector<double> logits(const std::vector<double>& x) const;
  std::vector<double> logits(const std::vector<float>& x) const;

  size_t input_dim() const { return input_dim_; }
  uint32_t classes() const { return classes_; }

 private:
  size_t input_dim_;
  uint32_t classes_;
  std::vector<double> weights_;  // classes x input_dim, row-major
  std::vector<double> bias_;
};

// Largest softmax probability, computed with max-subtraction.
double max_softmax(const std::vector<double>& logits);

// Index of the largest logit; ties go to the lowest index.
uint32_t argmax_class(const std::vector<double>& logits);

// CSV bridge to external classifiers. Header: sample_id,level,label,z0,...
// Rows of one sample must be contiguous with consecutive ascending levels
// and a constant label.
void save_logits(const std::string& path, const std::vector<LogitRecord>& records);
std::vector<LogitRecord> load_logits(const std::string& path);

}  // namespace picm
