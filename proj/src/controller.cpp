#include "picm/controller.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "picm/bytes.hpp"
#include "picm/error.hpp"
#include "picm/fixed_math.hpp"
#include "picm/parallel.hpp"
#include "picm/task_oracle.hpp"

namespace picm {
namespace {

constexpr int kDim = 12;
constexpr int kParams = 13;  // weights + bias
constexpr double kLn10 = 2.30258509299404568402;

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + fixed_exp(-t));
  double e = fixed_exp(t);
  return e / (1.0 + e);
}

// ln(1 + e^t) without overflow.
double ln1pexp(double t) {
  if (t > 0.0) return t + fixed_log(1.0 + fixed_exp(-t));
  return fixed_log(1.0 + fixed_exp(t));
}

double population_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= double(v.size());
  return var > 0.0 ? __builtin_sqrt(var) : 0.0;
}

// Cholesky solve of a symmetric positive definite system.
void solve_spd(double a[kParams][kParams], const double b[kParams], double x[kParams], int dim) {
  double l[kParams][kParams] = {};
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a[i][j];
      for (int k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
      if (i == j) {
        if (!(s > 0.0)) fail(Errc::bad_argument, "training system is not positive definite");
        l[i][i] = __builtin_sqrt(s);
      } else {
        l[i][j] = s / l[j][j];
      }
    }
  }
  double y[kParams];
  for (int i = 0; i < dim; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= l[i][k] * y[k];
    y[i] = s / l[i][i];
  }
  for (int i = dim - 1; i >= 0; --i) {
    double s = y[i];
    for (int k = i + 1; k < dim; ++k) s -= l[k][i] * x[k];
    x[i] = s / l[i][i];
  }
}

// Least-squares cubic in (x - shift), solved by Gaussian elimination.
struct Cubic {
  double c[4] = {0, 0, 0, 0};
  double shift = 0;
};

Cubic fit_cubic(const std::vector<double>& xs, const std::vector<double>& ys) {
  size_t n = xs.size();
  Cubic fit;
  for (double x : xs) fit.shift += x;
  fit.shift /= double(n);
  double m[4][7] = {};  // augmented [M | v]
  double pw[8] = {};
  std::vector<double> u(n);
  for (size_t i = 0; i < n; ++i) u[i] = xs[i] - fit.shift;
  for (size_t i = 0; i < n; ++i) {
    double p = 1.0;
    for (int d = 0; d < 8; ++d) {
      pw[d] += p;
      p *= u[i];
    }
  }
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m[r][c] = pw[r + c];
  for (size_t i = 0; i < n; ++i) {
    double p = 1.0;
    for (int r = 0; r < 4; ++r) {
      m[r][4] += ys[i] * p;
      p *= u[i];
    }
  }
  double scale = 0.0;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) scale = std::max(scale, std::fabs(m[r][c]));
  for (int col = 0; col < 4; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::fabs(m[r][col]) > std::fabs(m[pivot][col])) pivot = r;
    if (std::fabs(m[pivot][col]) <= 1e-12 * scale)
      fail(Errc::bad_argument, "curve points are too degenerate for a cubic fit");
    if (pivot != col)
      for (int c = col; c < 5; ++c) std::swap(m[pivot][c], m[col][c]);
    for (int r = col + 1; r < 4; ++r) {
      double f = m[r][col] / m[col][col];
      for (int c = col; c < 5; ++c) m[r][c] -= f * m[col][c];
    }
  }
  for (int r = 3; r >= 0; --r) {
    double s = m[r][4];
    for (int c = r + 1; c < 4; ++c) s -= m[r][c] * fit.c[c];
    fit.c[r] = s / m[r][r];
  }
  return fit;
}

double integrate(const Cubic& f, double lo, double hi) {
  auto anti = [&](double x) {
    double u = x - f.shift;
    return u * (f.c[0] + u * (f.c[1] / 2 + u * (f.c[2] / 3 + u * f.c[3] / 4)));
  };
  return anti(hi) - anti(lo);
}

void check_curve(const std::vector<RatePoint>& c, const char* name) {
  if (c.size() < 4)
    fail(Errc::bad_argument, std::string(name) + " needs at least 4 rate-accuracy points");
  for (const RatePoint& p : c) {
    if (!std::isfinite(p.rate) || !(p.rate > 0.0))
      fail(Errc::bad_argument, std::string(name) + " has a non-positive rate");
    if (!std::isfinite(p.accuracy))
      fail(Errc::bad_argument, std::string(name) + " has a non-finite accuracy");
  }
}

std::array<double, kDim> standardized(const FilterModel& m, const FeatureVector& f) {
  std::array<double, kDim> x = f.values();
  for (int i = 0; i < kDim; ++i) x[i] = (x[i] - m.feat_mean[i]) / m.feat_std[i];
  return x;
}

}  // namespace

FeatureVector extract_features(const std::vector<double>& logits) {
  size_t k = logits.size();
  if (k < 2) fail(Errc::bad_argument, "need at least 2 logits");
  for (size_t i = 0; i < k; ++i)
    if (!std::isfinite(logits[i]))
      fail(Errc::non_finite_value, "logits[" + std::to_string(i) + "] is not finite");

  double zmax = logits[0], zsecond = -1e308;
  for (size_t i = 1; i < k; ++i) {
    if (logits[i] > zmax) {
      zsecond = zmax;
      zmax = logits[i];
    } else if (logits[i] > zsecond) {
      zsecond = logits[i];
    }
  }

  std::vector<double> p(k);
  double sum = 0.0;
  for (size_t i = 0; i < k; ++i) {
    p[i] = fixed_exp(logits[i] - zmax);
    sum += p[i];
  }
  for (size_t i = 0; i < k; ++i) p[i] /= sum;

  std::vector<double> sorted = p;
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());

  FeatureVector f;
  f.conf_max = sorted[0];
  f.conf_std = population_std(p);
  for (double pi : p)
    if (pi > 0.0) f.conf_entropy -= pi * fixed_log(pi);
  f.conf_ratio = sorted[1] > 0.0 ? sorted[0] / sorted[1]
                                 : fixed_exp(std::min(zmax - zsecond, 700.0));
  size_t top = k < 10 ? k : size_t(10);
  for (size_t i = 0; i < top; ++i) f.top10_sum += sorted[i];
  double lm = 0.0;
  for (double z : logits) lm += z;
  f.logit_mean = lm / double(k);
  f.logit_max = zmax;
  f.logit_std = population_std(logits);
  f.logit_delta12 = zmax - zsecond;
  f.loss_pseudo_ce = -fixed_log(f.conf_max);
  f.margin_ce = fixed_log(f.conf_ratio);
  f.energy = -(zmax + fixed_log(sum));
  return f;
}

double predict_confidence(const FilterModel& model, const FeatureVector& f) {
  std::array<double, kDim> x = standardized(model, f);
  double t = model.bias;
  for (int i = 0; i < kDim; ++i) t += model.weights[i] * x[i];
  double p = sigmoid(t);
  if (p < 1e-300) p = 1e-300;
  if (p > 1.0 - 1e-16) p = 1.0 - 1e-16;
  return p;
}

FilterModel train_filter(const TrainingSet& data, double regularization, uint64_t seed) {
  size_t n = data.features.size();
  if (n == 0) fail(Errc::bad_argument, "empty training set");
  if (data.labels.size() != n) fail(Errc::bad_argument, "feature and label counts disagree");
  if (!(regularization > 0.0)) fail(Errc::bad_argument, "regularization must be positive");
  for (int s : data.labels)
    if (s != 0 && s != 1) fail(Errc::bad_argument, "labels must be 0 or 1");

  FilterModel model;
  model.regularization = regularization;
  model.seed = seed;

  std::vector<std::array<double, kDim>> raw(n);
  for (size_t i = 0; i < n; ++i) {
    raw[i] = data.features[i].values();
    for (int j = 0; j < kDim; ++j)
      if (!std::isfinite(raw[i][j]))
        fail(Errc::non_finite_value, "feature " + std::to_string(j) + " of row " +
                                         std::to_string(i) + " is not finite");
  }
  for (int j = 0; j < kDim; ++j) {
    double mean = 0.0;
    for (size_t i = 0; i < n; ++i) mean += raw[i][j];
    mean /= double(n);
    double var = 0.0;
    for (size_t i = 0; i < n; ++i) var += (raw[i][j] - mean) * (raw[i][j] - mean);
    var /= double(n);
    model.feat_mean[j] = mean;
    model.feat_std[j] = var > 0.0 ? __builtin_sqrt(var) : 1.0;
  }
  for (size_t i = 0; i < n; ++i)
    for (int j = 0; j < kDim; ++j) raw[i][j] = (raw[i][j] - model.feat_mean[j]) / model.feat_std[j];

  size_t positives = 0;
  for (int s : data.labels) positives += size_t(s);
  if (positives == 0 || positives == n) {
    // Constant model at the smoothed base rate.
    double p0 = (double(positives) + 1.0) / (double(n) + 2.0);
    model.single_class = true;
    model.bias = fixed_log(p0 / (1.0 - p0));
    return model;
  }

  double theta[kParams] = {};
  auto loss_at = [&](const double* th) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double t = th[kDim];
      for (int j = 0; j < kDim; ++j) t += th[j] * raw[i][j];
      acc += ln1pexp(t) - double(data.labels[i]) * t;
    }
    acc /= double(n);
    double reg = 0.0;
    for (int j = 0; j < kParams; ++j) reg += th[j] * th[j];
    return acc + 0.5 * regularization * reg;
  };

  double grad[kParams];
  uint64_t iter = 0;
  for (; iter < 1000; ++iter) {
    double h[kParams][kParams] = {};
    for (int j = 0; j < kParams; ++j) grad[j] = regularization * theta[j];
    for (size_t i = 0; i < n; ++i) {
      double t = theta[kDim];
      for (int j = 0; j < kDim; ++j) t += theta[j] * raw[i][j];
      double p = sigmoid(t);
      double g = (p - double(data.labels[i])) / double(n);
      double w = p * (1.0 - p) / double(n);
      for (int j = 0; j < kDim; ++j) grad[j] += g * raw[i][j];
      grad[kDim] += g;
      for (int a = 0; a < kDim; ++a)
        for (int b = 0; b <= a; ++b) h[a][b] += w * raw[i][a] * raw[i][b];
      for (int j = 0; j < kDim; ++j) h[kDim][j] += w * raw[i][j];
      h[kDim][kDim] += w;
    }
    for (int a = 0; a < kParams; ++a) {
      for (int b = a + 1; b < kParams; ++b) h[a][b] = h[b][a];
      h[a][a] += regularization;
    }
    double gnorm = 0.0;
    for (int j = 0; j < kParams; ++j) gnorm += grad[j] * grad[j];
    gnorm = __builtin_sqrt(gnorm);
    model.grad_norm = gnorm;
    if (gnorm <= 1e-8) break;

    double neg[kParams], step[kParams];
    for (int j = 0; j < kParams; ++j) neg[j] = -grad[j];
    solve_spd(h, neg, step, kParams);
    double before = loss_at(theta);
    double t = 1.0;
    double trial[kParams];
    bool moved = false;
    for (int half = 0; half < 40; ++half) {
      for (int j = 0; j < kParams; ++j) trial[j] = theta[j] + t * step[j];
      if (loss_at(trial) <= before) {
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
    for (int j = 0; j < kParams; ++j) theta[j] = trial[j];
  }
  model.iterations = iter;
  for (int j = 0; j < kDim; ++j) model.weights[j] = theta[j];
  model.bias = theta[kDim];
  return model;
}

namespace {
constexpr char kFilterMagic[4] = {'P', 'I', 'C', 'F'};
constexpr uint8_t kFilterVersion = 1;
}  // namespace

void save_filter(const FilterModel& model, const std::string& path) {
  ByteWriter w;
  w.raw(kFilterMagic, 4);
  w.u8(kFilterVersion);
  for (double v : model.weights) w.f64(v);
  w.f64(model.bias);
  for (double v : model.feat_mean) w.f64(v);
  for (double v : model.feat_std) w.f64(v);
  w.f64(model.regularization);
  w.f64(double(model.iterations));
  w.f64(double(model.seed));
  w.f64(model.single_class ? 1.0 : 0.0);
  w.f64(model.grad_norm);
  write_file(path, w.bytes.data(), w.bytes.size());
}

FilterModel load_filter(const std::string& path) {
  std::vector<uint8_t> data = read_file(path);
  ByteReader r(data.data(), data.size());
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kFilterMagic, 4) != 0) fail(Errc::bad_magic, path + ": bad magic");
  uint8_t version = r.u8();
  if (version != kFilterVersion)
    fail(Errc::bad_version, path + ": unsupported filter version " + std::to_string(version));
  FilterModel m;
  for (double& v : m.weights) v = r.f64();
  m.bias = r.f64();
  for (double& v : m.feat_mean) v = r.f64();
  for (double& v : m.feat_std) v = r.f64();
  m.regularization = r.f64();
  m.iterations = uint64_t(r.f64());
  m.seed = uint64_t(r.f64());
  m.single_class = r.f64() != 0.0;
  m.grad_norm = r.f64();
  if (r.remaining() != 0) fail(Errc::schema, path + ": trailing bytes");
  for (double v : m.feat_std)
    if (!(v > 0.0)) fail(Errc::schema, path + ": standardization stds must be positive");
  return m;
}

AdaptiveResult adaptive_scan(const std::vector<uint64_t>& levels, double tau,
                             const std::function<AdaptiveStep(uint64_t)>& eval) {
  if (levels.empty()) fail(Errc::bad_argument, "no levels to scan");
  if (!(tau >= 0.0 && tau <= 1.0)) fail(Errc::bad_argument, "tau must lie in [0, 1]");
  AdaptiveResult res;
  for (size_t i = 0; i < levels.size(); ++i) {
    AdaptiveStep st = eval(levels[i]);
    st.level = levels[i];
    st.stop = st.p >= tau || i + 1 == levels.size();
    res.trace.push_back(st);
    if (st.stop) {
      res.prediction = st.prediction;
      res.level = st.level;
      res.bytes = st.bytes;
      break;
    }
  }
  return res;
}

AdaptiveResult adaptive_decode(const ProgressiveBitstream& bs, const ClassifierFn& classify,
                               const FilterModel& model, double tau,
                               const std::vector<uint64_t>& levels, const DecodeOptions& dopt) {
  if (levels.empty()) fail(Errc::bad_argument, "no levels to scan");
  for (size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] >= bs.cuts.size())
      fail(Errc::bad_argument, "level " + std::to_string(levels[i]) + " beyond the cut table");
    if (i > 0 && levels[i] <= levels[i - 1])
      fail(Errc::bad_argument, "levels must ascend");
  }
  size_t prefix = bs.fixed_prefix_size();
  auto eval = [&](uint64_t lvl) {
    DecodeResult dr = decode(bs, DecodeBudget::level(lvl), dopt);
    std::vector<double> z = classify(dr.grid);
    AdaptiveStep st;
    st.bytes = prefix + dr.payload_bytes_available;
    st.p = predict_confidence(model, extract_features(z));
    st.prediction = argmax_class(z);
    return st;
  };
  return adaptive_scan(levels, tau, eval);
}

TrainingSet build_training_set(const std::vector<LatentGrid>& grids, Strategy strategy,
                               const EncodeOptions& eopt, const ClassifierFn& classify,
                               const std::vector<uint64_t>& levels) {
  if (grids.empty()) fail(Errc::bad_argument, "no grids");
  if (levels.empty()) fail(Errc::bad_argument, "no levels");
  TrainingSet ts;
  ts.features.resize(grids.size() * levels.size());
  ts.labels.resize(ts.features.size());
  parallel_for(grids.size(), [&](size_t gi) {
    EncodeResult er = encode(grids[gi], strategy, eopt);
    DecodeOptions dopt;
    if (is_oracle(strategy) && !er.stream.header.order_embedded) dopt.group_order = er.group_order;
    DecodeResult full = decode(er.stream, DecodeBudget::full(), dopt);
    uint32_t label = argmax_class(classify(full.grid));
    for (size_t li = 0; li < levels.size(); ++li) {
      DecodeResult dr = decode(er.stream, DecodeBudget::level(levels[li]), dopt);
      std::vector<double> z = classify(dr.grid);
      size_t row = gi * levels.size() + li;
      ts.features[row] = extract_features(z);
      ts.labels[row] = argmax_class(z) == label ? 1 : 0;
    }
  });
  return ts;
}

double ece(const std::vector<PredictionOutcome>& outcomes, int bins) {
  if (outcomes.empty()) fail(Errc::bad_argument, "no predictions");
  if (bins < 1) fail(Errc::bad_argument, "need at least one bin");
  std::vector<double> sum_p(bins, 0.0), sum_c(bins, 0.0);
  std::vector<uint64_t> count(bins, 0);
  for (const PredictionOutcome& o : outcomes) {
    if (!(o.p >= 0.0 && o.p <= 1.0))
      fail(Errc::bad_argument, "confidence " + std::to_string(o.p) + " outside [0, 1]");
    int b = int(o.p * bins);
    if (b == bins) b = bins - 1;
    sum_p[b] += o.p;
    sum_c[b] += o.correct ? 1.0 : 0.0;
    count[b] += 1;
  }
  double total = double(outcomes.size());
  double e = 0.0;
  for (int b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    double conf = sum_p[b] / double(count[b]);
    double acc = sum_c[b] / double(count[b]);
    e += (double(count[b]) / total) * std::fabs(acc - conf);
  }
  return e;
}

BdSummary bd_metrics(const std::vector<RatePoint>& a, const std::vector<RatePoint>& b) {
  check_curve(a, "first curve");
  check_curve(b, "second curve");
  auto log_rates = [](const std::vector<RatePoint>& c) {
    std::vector<double> out(c.size());
    for (size_t i = 0; i < c.size(); ++i) out[i] = fixed_log(c[i].rate) / kLn10;
    return out;
  };
  auto accuracies = [](const std::vector<RatePoint>& c) {
    std::vector<double> out(c.size());
    for (size_t i = 0; i < c.size(); ++i) out[i] = c[i].accuracy;
    return out;
  };
  std::vector<double> lra = log_rates(a), lrb = log_rates(b);
  std::vector<double> aca = accuracies(a), acb = accuracies(b);

  auto overlap = [](const std::vector<double>& x1, const std::vector<double>& x2, double& lo,
                    double& hi) {
    lo = std::max(*std::min_element(x1.begin(), x1.end()),
                  *std::min_element(x2.begin(), x2.end()));
    hi = std::min(*std::max_element(x1.begin(), x1.end()),
                  *std::max_element(x2.begin(), x2.end()));
    if (!(hi > lo)) fail(Errc::bad_argument, "curves do not overlap");
  };

  BdSummary out;
  {
    // Accuracy as a function of log10 rate.
    double lo, hi;
    overlap(lra, lrb, lo, hi);
    Cubic fa = fit_cubic(lra, aca), fb = fit_cubic(lrb, acb);
    out.bd_accuracy = (integrate(fb, lo, hi) - integrate(fa, lo, hi)) / (hi - lo);
  }
  {
    // log10 rate as a function of accuracy.
    double lo, hi;
    overlap(aca, acb, lo, hi);
    Cubic fa = fit_cubic(aca, lra), fb = fit_cubic(acb, lrb);
    double d = (integrate(fb, lo, hi) - integrate(fa, lo, hi)) / (hi - lo);
    out.bd_rate_percent = 100.0 * (fixed_exp(d * kLn10) - 1.0);
  }
  return out;
}

}  // namespace picm
