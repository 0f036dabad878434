#include "picm/task_oracle.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>
#include <unordered_set>

#include "picm/bytes.hpp"
#include "picm/error.hpp"
#include "picm/fixed_math.hpp"
#include "picm/rng.hpp"

namespace picm {
namespace {

constexpr size_t kMaxDim = size_t(1) << 28;

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

template <typename T>
T parse_number(const std::string& field, const std::string& what, size_t line_no) {
  T value{};
  const char* first = field.data();
  const char* last = first + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    fail(Errc::schema, "line " + std::to_string(line_no) + ": bad " + what + " '" + field + "'");
  return value;
}

void append_number(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

SynthClassifier::SynthClassifier(uint64_t seed, size_t input_dim, uint32_t classes)
    : input_dim_(input_dim), classes_(classes) {
  if (input_dim == 0 || input_dim > kMaxDim)
    fail(Errc::bad_argument, "classifier input dimension out of range");
  if (classes < 2) fail(Errc::bad_argument, "classifier needs at least 2 classes");
  Rng rng(seed);
  double scale = 1.0 / __builtin_sqrt(double(input_dim));
  weights_.resize(size_t(classes) * input_dim);
  for (double& w : weights_) w = rng.normal() * scale;
  bias_.resize(classes);
  for (double& b : bias_) b = rng.normal();
}

std::vector<double> SynthClassifier::logits(const std::vector<double>& x) const {
  if (x.size() != input_dim_)
    fail(Errc::bad_argument, "input has " + std::to_string(x.size()) + " values, classifier wants " +
                                 std::to_string(input_dim_));
  for (size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]))
      fail(Errc::non_finite_value, "input[" + std::to_string(i) + "] is not finite");
  std::vector<double> z(classes_);
  for (uint32_t k = 0; k < classes_; ++k) {
    const double* row = weights_.data() + size_t(k) * input_dim_;
    double acc = bias_[k];
    for (size_t i = 0; i < input_dim_; ++i) acc += row[i] * x[i];
    z[k] = acc;
  }
  return z;
}

std::vector<double> SynthClassifier::logits(const std::vector<float>& x) const {
  std::vector<double> xd(x.begin(), x.end());
  return logits(xd);
}

double max_softmax(const std::vector<double>& logits) {
  if (logits.empty()) fail(Errc::bad_argument, "no logits");
  double zmax = logits[0];
  for (double z : logits) zmax = std::max(zmax, z);
  double sum = 0.0;
  for (double z : logits) sum += fixed_exp(z - zmax);
  return 1.0 / sum;
}

uint32_t argmax_class(const std::vector<double>& logits) {
  if (logits.empty()) fail(Errc::bad_argument, "no logits");
  uint32_t best = 0;
  for (uint32_t k = 1; k < logits.size(); ++k)
    if (logits[k] > logits[best]) best = k;
  return best;
}

void save_logits(const std::string& path, const std::vector<LogitRecord>& records) {
  size_t classes = records.empty() ? 2 : records[0].logits.size();
  std::string out = "sample_id,level,label";
  for (size_t k = 0; k < classes; ++k) out += ",z" + std::to_string(k);
  out += "\n";
  for (const LogitRecord& r : records) {
    if (r.logits.size() != classes)
      fail(Errc::bad_argument, "records disagree on the number of classes");
    out += std::to_string(r.sample_id);
    out += ',';
    out += std::to_string(r.level);
    out += ',';
    out += std::to_string(r.label);
    for (double z : r.logits) {
      out += ',';
      append_number(out, z);
    }
    out += '\n';
  }
  write_file(path, out.data(), out.size());
}

std::vector<LogitRecord> load_logits(const std::string& path) {
  std::vector<uint8_t> raw = read_file(path);
  std::string text(raw.begin(), raw.end());
  std::vector<std::string> lines;
  size_t start = 0;
  while (start < text.size()) {
    size_t nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = nl + 1;
  }
  if (lines.empty()) fail(Errc::schema, path + ": missing header");

  std::vector<std::string> head = split_fields(lines[0]);
  if (head.size() < 5 || head[0] != "sample_id" || head[1] != "level" || head[2] != "label")
    fail(Errc::schema, path + ": header must be sample_id,level,label,z0,...");
  size_t classes = head.size() - 3;
  for (size_t k = 0; k < classes; ++k)
    if (head[3 + k] != "z" + std::to_string(k))
      fail(Errc::schema, path + ": logit column " + std::to_string(k) + " must be named z" +
                             std::to_string(k));

  std::vector<LogitRecord> records;
  std::unordered_set<uint64_t> finished;
  bool have_current = false;
  uint64_t current = 0;
  for (size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    size_t line_no = li + 1;
    std::vector<std::string> f = split_fields(lines[li]);
    if (f.size() != 3 + classes)
      fail(Errc::schema, "line " + std::to_string(line_no) + ": has " + std::to_string(f.size()) +
                             " fields, want " + std::to_string(3 + classes));
    LogitRecord r;
    r.sample_id = parse_number<uint64_t>(f[0], "sample id", line_no);
    r.level = parse_number<uint32_t>(f[1], "level", line_no);
    r.label = parse_number<uint32_t>(f[2], "label", line_no);
    if (r.label >= classes)
      fail(Errc::schema, "line " + std::to_string(line_no) + ": label " + std::to_string(r.label) +
                             " outside " + std::to_string(classes) + " classes");
    r.logits.resize(classes);
    for (size_t k = 0; k < classes; ++k) {
      r.logits[k] = parse_number<double>(f[3 + k], "logit", line_no);
      if (!std::isfinite(r.logits[k]))
        fail(Errc::schema, "line " + std::to_string(line_no) + ": non-finite logit");
    }
    if (!have_current || r.sample_id != current) {
      if (have_current) finished.insert(current);
      if (finished.count(r.sample_id))
        fail(Errc::schema, "line " + std::to_string(line_no) + ": rows of sample " +
                               std::to_string(r.sample_id) + " are not contiguous");
      have_current = true;
      current = r.sample_id;
    } else {
      const LogitRecord& prev = records.back();
      if (r.level <= prev.level)
        fail(Errc::schema, "line " + std::to_string(line_no) + ": level " +
                               std::to_string(r.level) + " does not ascend past " +
                               std::to_string(prev.level));
      if (r.label != prev.label)
        fail(Errc::schema, "line " + std::to_string(line_no) + ": label changes within sample " +
                               std::to_string(r.sample_id));
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace picm
