#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <exception>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "picm/bytes.hpp"
#include "picm/codec.hpp"
#include "picm/controller.hpp"
#include "picm/error.hpp"
#include "picm/parallel.hpp"
#include "picm/task_oracle.hpp"
#include "picm/tensor.hpp"
#include "picm/trit_plane.hpp"

namespace {

using namespace picm;

int exit_code_for(Errc c) {
  switch (c) {
    case Errc::io:
      return 3;
    case Errc::bad_magic:
    case Errc::bad_version:
    case Errc::dim_overflow:
    case Errc::truncated_payload:
      return 4;
    case Errc::bad_argument:
    case Errc::non_finite_value:
    case Errc::out_of_range_coeff:
      return 5;
    case Errc::schema:
      return 6;
    case Errc::order_unavailable:
      return 7;
    default:
      return 1;
  }
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string fmt_hex(uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

// Flag-syntax errors; reported as usage errors (exit 2).
[[noreturn]] void usage_error(const std::string& msg) { throw std::invalid_argument(msg); }

uint64_t parse_u64(const std::string& s, const std::string& flag) {
  uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    usage_error(flag + ": '" + s + "' is not a non-negative integer");
  return v;
}

double parse_f64(const std::string& s, const std::string& flag) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    usage_error(flag + ": '" + s + "' is not a number");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t p = s.find(sep, start);
    if (p == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, p - start));
    start = p + 1;
  }
}

Strategy parse_strategy(const std::string& s) {
  auto st = strategy_from_name(s);
  if (!st)
    usage_error("--strategy: '" + s +
                "' is not one of expvar, sigma, random, oracle-channel, oracle-patch");
  return *st;
}

DecodeBudget parse_budget(const std::string& s) {
  if (s == "full") return DecodeBudget::full();
  if (s.rfind("bytes:", 0) == 0) return DecodeBudget::bytes(parse_u64(s.substr(6), "--budget"));
  if (s.rfind("level:", 0) == 0) return DecodeBudget::level(parse_u64(s.substr(6), "--budget"));
  usage_error("--budget: '" + s + "' is not full, bytes:N, or level:K");
}

ScaleLaw parse_law(const std::string& s) {
  if (s.rfind("constant:", 0) == 0) return ConstantScale{parse_f64(s.substr(9), "--law")};
  if (s.rfind("loguniform:", 0) == 0) {
    std::vector<std::string> parts = split(s.substr(11), ',');
    if (parts.size() != 2) usage_error("--law: loguniform wants LO,HI");
    return LogUniformScale{parse_f64(parts[0], "--law"), parse_f64(parts[1], "--law")};
  }
  usage_error("--law: '" + s + "' is not constant:S or loguniform:LO,HI");
}

std::vector<double> parse_taus(const std::string& s) {
  std::vector<double> out;
  for (const std::string& tok : split(s, ',')) out.push_back(parse_f64(tok, "--tau"));
  if (out.empty()) usage_error("--tau: empty list");
  return out;
}

struct LevelSpec {
  enum class Kind { all, planes, list } kind = Kind::all;
  std::vector<uint64_t> list;
};

LevelSpec parse_levels(const std::string& s) {
  LevelSpec spec;
  if (s == "all") {
    spec.kind = LevelSpec::Kind::all;
  } else if (s == "planes") {
    spec.kind = LevelSpec::Kind::planes;
  } else {
    spec.kind = LevelSpec::Kind::list;
    for (const std::string& tok : split(s, ','))
      spec.list.push_back(parse_u64(tok, "--levels"));
    if (spec.list.empty()) usage_error("--levels: empty list");
  }
  return spec;
}

std::vector<uint64_t> resolve_levels(const LevelSpec& spec, const ProgressiveBitstream& bs) {
  std::vector<uint64_t> out;
  if (spec.kind == LevelSpec::Kind::list) {
    out = spec.list;
  } else if (spec.kind == LevelSpec::Kind::all) {
    for (uint64_t l = 1; l < bs.cuts.size(); ++l) out.push_back(l);
  } else {
    RateReport rep = rate_report(bs);
    for (int g = 1; g <= rep.planes; ++g)
      out.push_back(uint64_t(g) * uint64_t(rep.checkpoints_per_plane));
  }
  return out;
}

void write_order_file(const std::string& path, const std::vector<uint32_t>& order) {
  std::string out = "rank,group\n";
  for (size_t r = 0; r < order.size(); ++r)
    out += std::to_string(r) + "," + std::to_string(order[r]) + "\n";
  write_file(path, out.data(), out.size());
}

std::vector<uint32_t> read_order_file(const std::string& path) {
  std::vector<uint8_t> raw = read_file(path);
  std::string text(raw.begin(), raw.end());
  std::vector<uint32_t> order;
  size_t start = 0;
  size_t line_no = 0;
  while (start < text.size()) {
    size_t nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    start = nl + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != "rank,group") fail(Errc::schema, path + ": header must be rank,group");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f = split(line, ',');
    if (f.size() != 2) fail(Errc::schema, path + ": line " + std::to_string(line_no) + " malformed");
    uint32_t rank = 0, group = 0;
    auto r1 = std::from_chars(f[0].data(), f[0].data() + f[0].size(), rank);
    auto r2 = std::from_chars(f[1].data(), f[1].data() + f[1].size(), group);
    if (r1.ec != std::errc() || r2.ec != std::errc())
      fail(Errc::schema, path + ": line " + std::to_string(line_no) + " malformed");
    if (rank != order.size())
      fail(Errc::schema, path + ": ranks must ascend from zero");
    order.push_back(group);
  }
  return order;
}

// Shared options for commands that synthesize a batch of grids.
struct BatchConfig {
  uint64_t seed = 1;
  uint64_t count = 50;
  uint32_t height = 6, width = 6, channels = 24;
  std::string law = "loguniform:0.1,10";
  std::string strategy = "expvar";
  int checkpoints = 16;
  bool clamp = false;
  bool transmit_order = false;
  uint32_t classes = 10;
  uint64_t classifier_seed = 1;
  std::string levels = "all";
};

struct EncodedSample {
  ProgressiveBitstream stream;
  DecodeOptions dopt;
  uint32_t label = 0;
};

// Deterministic per-sample pipeline: grid i from seed+i, one encode, label
// from the full reconstruction.
std::vector<EncodedSample> encode_batch(const BatchConfig& cfg, const SynthClassifier& clf,
                                        const ClassifierFn& classify) {
  Strategy strat = parse_strategy(cfg.strategy);
  ScaleLaw law = parse_law(cfg.law);
  OracleSetup setup;
  setup.confidence = [&](const std::vector<double>& recon) {
    return max_softmax(clf.logits(recon));
  };
  std::vector<EncodedSample> out(cfg.count);
  parallel_for(cfg.count, [&](size_t i) {
    LatentGrid g = synth_grid(cfg.seed + i, cfg.height, cfg.width, cfg.channels, law);
    EncodeOptions eopt;
    eopt.seed = cfg.seed;
    eopt.checkpoints_per_plane = cfg.checkpoints;
    eopt.clamp_out_of_range = cfg.clamp;
    eopt.embed_group_order = cfg.transmit_order && is_oracle(strat);
    eopt.oracle = &setup;
    EncodeResult er = encode(g, strat, eopt);
    if (is_oracle(strat) && !er.stream.header.order_embedded)
      out[i].dopt.group_order = er.group_order;
    out[i].stream = std::move(er.stream);
    DecodeResult full = decode(out[i].stream, DecodeBudget::full(), out[i].dopt);
    out[i].label = argmax_class(classify(full.grid));
  });
  return out;
}

int cmd_gen(uint64_t seed, uint32_t h, uint32_t w, uint32_t c, const std::string& law_str,
            const std::string& out) {
  ScaleLaw law = parse_law(law_str);
  LatentGrid g = synth_grid(seed, h, w, c, law);
  save_grid(g, out);
  double mean = 0, var = 0;
  for (float v : g.values) mean += v;
  mean /= double(g.size());
  for (float v : g.values) var += (v - mean) * (v - mean);
  var /= double(g.size());
  std::cout << "wrote " << out << "\n";
  std::cout << "dims=" << h << "x" << w << "x" << c << " elems=" << g.size() << "\n";
  std::cout << "value_mean=" << fmt(mean) << " value_var=" << fmt(var) << "\n";
  return 0;
}

int cmd_encode(const std::string& in, const std::string& out, const std::string& strategy_str,
               uint64_t seed, int checkpoints, bool clamp, bool transmit_order,
               uint32_t classes, uint64_t clf_seed, const std::string& order_out) {
  Strategy strat = parse_strategy(strategy_str);
  LatentGrid g = load_grid(in);
  EncodeOptions opt;
  opt.seed = seed;
  opt.checkpoints_per_plane = checkpoints;
  opt.clamp_out_of_range = clamp;
  opt.embed_group_order = transmit_order;
  SynthClassifier clf(is_oracle(strat) ? clf_seed : 1, is_oracle(strat) ? g.size() : 1,
                      is_oracle(strat) ? classes : 2);
  OracleSetup setup;
  setup.confidence = [&](const std::vector<double>& recon) {
    return max_softmax(clf.logits(recon));
  };
  if (is_oracle(strat)) opt.oracle = &setup;
  EncodeResult er = encode(g, strat, opt);
  std::vector<uint8_t> bytes = serialize(er.stream);
  write_file(out, bytes.data(), bytes.size());
  if (!order_out.empty()) {
    if (!is_oracle(strat)) fail(Errc::bad_argument, "--order-out needs an oracle strategy");
    write_order_file(order_out, er.group_order);
  }
  std::cout << "wrote " << out << "\n";
  std::cout << "strategy=" << strategy_name(strat) << " seed=" << seed << "\n";
  std::cout << "prefix_bytes=" << er.stream.fixed_prefix_size()
            << " payload_bytes=" << er.stream.payload.size() << " total_bytes=" << bytes.size()
            << "\n";
  std::cout << "symbols=" << er.symbols_total << " planes=" << er.plane_symbols.size() << "\n";
  std::cout << "payload_bits=" << 8 * er.stream.payload.size()
            << " ideal_bits=" << fmt(er.ideal_bits) << " estimate_bits=" << fmt(er.estimate_bits)
            << "\n";
  std::cout << "quant_mse=" << fmt(er.quant_mse) << "\n";
  std::cout << "order_hash=" << fmt_hex(er.order_hash) << "\n";
  return 0;
}

int cmd_decode(const std::string& in, const std::string& out, const std::string& budget_str,
               const std::string& order_in, const std::string& ref) {
  DecodeBudget budget = parse_budget(budget_str);
  ProgressiveBitstream bs = parse(read_file(in));
  DecodeOptions dopt;
  if (!order_in.empty()) dopt.group_order = read_order_file(order_in);
  DecodeResult dr = decode(bs, budget, dopt);
  if (!out.empty()) save_grid(dr.grid, out);
  std::cout << "prefix_bytes=" << bs.fixed_prefix_size()
            << " payload_available=" << dr.payload_bytes_available
            << " payload_consumed=" << dr.payload_bytes_consumed << "\n";
  std::cout << "symbols_decoded=" << dr.symbols_decoded
            << " truncated=" << (dr.truncated ? 1 : 0) << "\n";
  for (size_t g = 0; g < dr.plane_symbols.size(); ++g)
    std::cout << "plane" << g << "=" << dr.plane_symbols[g] << "/" << dr.plane_slot_totals[g]
              << "\n";
  std::cout << "order_hash=" << fmt_hex(dr.order_hash) << "\n";
  if (!ref.empty()) {
    LatentGrid r = load_grid(ref);
    if (r.size() != dr.centered.size())
      fail(Errc::bad_argument, "reference dimensions disagree with the stream");
    double mse = 0;
    for (size_t i = 0; i < dr.centered.size(); ++i) {
      double d = double(r.values[i]) - dr.centered[i];
      mse += d * d;
    }
    mse /= double(dr.centered.size());
    std::cout << "mse_centered=" << fmt(mse) << "\n";
  }
  if (!out.empty()) std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_priority(const std::string& in, const std::string& out, const std::string& strategy_str,
                 uint64_t seed, bool clamp, uint32_t classes, uint64_t clf_seed) {
  Strategy strat = parse_strategy(strategy_str);
  LatentGrid g = load_grid(in);
  LatentGrid q = quantize(g);
  SideModel sm = build_side_model(q);
  LatentGrid model = model_grid(q, sm);
  TritPlaneStack stack = decompose(model, clamp);
  SynthClassifier clf(is_oracle(strat) ? clf_seed : 1, is_oracle(strat) ? g.size() : 1,
                      is_oracle(strat) ? classes : 2);
  OracleSetup setup;
  setup.confidence = [&](const std::vector<double>& recon) {
    return max_softmax(clf.logits(recon));
  };
  PriorityOrder po = build_order(strat, model, stack, seed, is_oracle(strat) ? &setup : nullptr);
  std::string csv = "plane,position,slot,score\n";
  for (size_t pl = 0; pl < po.planes.size(); ++pl)
    for (size_t i = 0; i < po.planes[pl].slots.size(); ++i)
      csv += std::to_string(pl) + "," + std::to_string(i) + "," +
             std::to_string(po.planes[pl].slots[i]) + "," + fmt(po.planes[pl].scores[i]) + "\n";
  write_file(out, csv.data(), csv.size());
  std::cout << "wrote " << out << "\n";
  std::cout << "strategy=" << strategy_name(strat) << " planes=" << po.planes.size() << "\n";
  std::cout << "order_hash=" << fmt_hex(po.hash) << "\n";
  return 0;
}

int cmd_rate_curve(const std::string& in, const std::string& out) {
  ProgressiveBitstream bs = parse(read_file(in));
  RateReport rep = rate_report(bs);
  std::string csv = "level,payload_offset,total_bits,bpp\n";
  for (const auto& row : rep.level_rows)
    csv += std::to_string(row.level) + "," + std::to_string(row.offset) + "," +
           std::to_string(row.total_bits) + "," + fmt(row.bpp) + "\n";
  write_file(out, csv.data(), csv.size());
  std::cout << "wrote " << out << "\n";
  std::cout << "pixels=" << rep.pixel_count << " prefix_bytes=" << rep.prefix_bytes
            << " payload_bytes=" << rep.payload_bytes << "\n";
  for (const auto& row : rep.plane_rows)
    std::cout << "plane" << row.plane << "_bytes=" << (row.end - row.start) << "\n";
  return 0;
}

int cmd_filter_train(const BatchConfig& cfg, const std::string& logits_csv,
                     const std::string& out, double regularization,
                     const std::string& logits_out) {
  TrainingSet ts;
  if (!logits_csv.empty()) {
    if (!logits_out.empty()) fail(Errc::bad_argument, "--logits-out needs the synthetic mode");
    std::vector<LogitRecord> records = load_logits(logits_csv);
    if (records.empty()) fail(Errc::schema, logits_csv + ": no rows");
    for (const LogitRecord& rec : records) {
      ts.features.push_back(extract_features(rec.logits));
      ts.labels.push_back(argmax_class(rec.logits) == rec.label ? 1 : 0);
    }
  } else {
    SynthClassifier clf(cfg.classifier_seed, size_t(cfg.height) * cfg.width * cfg.channels,
                        cfg.classes);
    ClassifierFn classify = [&](const LatentGrid& g) { return clf.logits(g.values); };
    std::vector<EncodedSample> samples = encode_batch(cfg, clf, classify);
    std::vector<uint64_t> levels = resolve_levels(parse_levels(cfg.levels), samples[0].stream);
    ts.features.resize(samples.size() * levels.size());
    ts.labels.resize(ts.features.size());
    std::vector<LogitRecord> records(ts.features.size());
    parallel_for(samples.size(), [&](size_t i) {
      for (size_t li = 0; li < levels.size(); ++li) {
        DecodeResult dr = decode(samples[i].stream, DecodeBudget::level(levels[li]),
                                 samples[i].dopt);
        std::vector<double> z = clf.logits(dr.grid.values);
        size_t row = i * levels.size() + li;
        ts.features[row] = extract_features(z);
        ts.labels[row] = argmax_class(z) == samples[i].label ? 1 : 0;
        records[row] = LogitRecord{i, uint32_t(levels[li]), samples[i].label, std::move(z)};
      }
    });
    if (!logits_out.empty()) {
      save_logits(logits_out, records);
      std::cout << "wrote " << logits_out << "\n";
    }
  }
  FilterModel fm = train_filter(ts, regularization, cfg.seed);
  save_filter(fm, out);
  size_t pos = 0;
  for (int s : ts.labels) pos += size_t(s);
  std::cout << "wrote " << out << "\n";
  std::cout << "rows=" << ts.labels.size() << " positives=" << pos << "\n";
  std::cout << "iterations=" << fm.iterations << " grad_norm=" << fmt(fm.grad_norm)
            << " single_class=" << (fm.single_class ? 1 : 0) << "\n";
  return 0;
}

int cmd_adaptive(const BatchConfig& cfg, const std::string& model_path, const std::string& tau_str,
                 const std::string& out_prefix) {
  FilterModel fm = load_filter(model_path);
  std::vector<double> taus = parse_taus(tau_str);
  std::vector<std::string> tau_tokens = split(tau_str, ',');
  SynthClassifier clf(cfg.classifier_seed, size_t(cfg.height) * cfg.width * cfg.channels,
                      cfg.classes);
  ClassifierFn classify = [&](const LatentGrid& g) { return clf.logits(g.values); };
  std::vector<EncodedSample> samples = encode_batch(cfg, clf, classify);
  std::vector<uint64_t> levels = resolve_levels(parse_levels(cfg.levels), samples[0].stream);
  for (size_t ti = 0; ti < taus.size(); ++ti) {
    std::vector<AdaptiveResult> results(samples.size());
    parallel_for(samples.size(), [&](size_t i) {
      results[i] = adaptive_decode(samples[i].stream, classify, fm, taus[ti], levels,
                                   samples[i].dopt);
    });
    std::string csv = "sample_id,level,bytes,p,pred,stop\n";
    double total_bytes = 0;
    size_t correct = 0;
    for (size_t i = 0; i < samples.size(); ++i) {
      for (const AdaptiveStep& st : results[i].trace)
        csv += std::to_string(i) + "," + std::to_string(st.level) + "," +
               std::to_string(st.bytes) + "," + fmt(st.p) + "," + std::to_string(st.prediction) +
               "," + (st.stop ? "1" : "0") + "\n";
      total_bytes += double(results[i].bytes);
      correct += results[i].prediction == samples[i].label ? 1 : 0;
    }
    std::string path = out_prefix + "-tau" + tau_tokens[ti] + ".csv";
    write_file(path, csv.data(), csv.size());
    std::cout << "wrote " << path << "\n";
    std::cout << "tau=" << fmt(taus[ti]) << " mean_bytes=" << fmt(total_bytes / samples.size())
              << " accuracy=" << fmt(double(correct) / samples.size()) << "\n";
  }
  return 0;
}

int cmd_ece(const std::string& logits_csv, const std::string& model_path, int bins,
            const std::string& out) {
  FilterModel fm = load_filter(model_path);
  std::vector<LogitRecord> records = load_logits(logits_csv);
  if (records.empty()) fail(Errc::schema, logits_csv + ": no rows");
  std::vector<PredictionOutcome> outcomes;
  for (const LogitRecord& rec : records) {
    PredictionOutcome o;
    o.p = predict_confidence(fm, extract_features(rec.logits));
    o.correct = argmax_class(rec.logits) == rec.label;
    outcomes.push_back(o);
  }
  double e = ece(outcomes, bins);
  if (!out.empty()) {
    std::vector<double> sum_p(bins, 0.0), sum_c(bins, 0.0);
    std::vector<uint64_t> count(bins, 0);
    for (const PredictionOutcome& o : outcomes) {
      int b = int(o.p * bins);
      if (b == bins) b = bins - 1;
      sum_p[b] += o.p;
      sum_c[b] += o.correct ? 1.0 : 0.0;
      count[b] += 1;
    }
    std::string csv = "bin,lo,hi,count,mean_confidence,accuracy\n";
    for (int b = 0; b < bins; ++b) {
      double lo = double(b) / bins, hi = double(b + 1) / bins;
      double conf = count[b] ? sum_p[b] / double(count[b]) : 0.0;
      double acc = count[b] ? sum_c[b] / double(count[b]) : 0.0;
      csv += std::to_string(b) + "," + fmt(lo) + "," + fmt(hi) + "," + std::to_string(count[b]) +
             "," + fmt(conf) + "," + fmt(acc) + "\n";
    }
    write_file(out, csv.data(), csv.size());
    std::cout << "wrote " << out << "\n";
  }
  std::cout << "rows=" << outcomes.size() << " bins=" << bins << "\n";
  std::cout << "ece=" << fmt(e) << "\n";
  return 0;
}

void add_batch_options(CLI::App* cmd, BatchConfig& cfg) {
  cmd->add_option("--seed", cfg.seed, "base seed; sample i uses seed+i");
  cmd->add_option("--grids", cfg.count, "number of synthetic grids");
  cmd->add_option("--height", cfg.height, "latent rows");
  cmd->add_option("--width", cfg.width, "latent cols");
  cmd->add_option("--channels", cfg.channels, "latent channels");
  cmd->add_option("--law", cfg.law, "scale law: constant:S or loguniform:LO,HI");
  cmd->add_option("--strategy", cfg.strategy,
                  "expvar, sigma, random, oracle-channel, or oracle-patch");
  cmd->add_option("--checkpoints", cfg.checkpoints, "cut-table checkpoints per plane");
  cmd->add_flag("--clamp-range", cfg.clamp, "clamp coefficients past the symbol range");
  cmd->add_flag("--transmit-order", cfg.transmit_order, "embed the oracle group order");
  cmd->add_option("--classes", cfg.classes, "synthetic classifier classes");
  cmd->add_option("--classifier-seed", cfg.classifier_seed, "synthetic classifier seed");
  cmd->add_option("--levels", cfg.levels, "decoding levels: all, planes, or L1,L2,...");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"progressive trit-plane codec for Gaussian latent grids"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "synthesize a latent grid");
  uint64_t gen_seed = 1;
  uint32_t gen_h = 8, gen_w = 8, gen_c = 32;
  std::string gen_law = "loguniform:0.1,10";
  std::string gen_out;
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--height", gen_h, "latent rows");
  gen->add_option("--width", gen_w, "latent cols");
  gen->add_option("--channels", gen_c, "latent channels");
  gen->add_option("--law", gen_law, "scale law: constant:S or loguniform:LO,HI");
  gen->add_option("--out", gen_out, "output tensor path")->required();

  // encode
  auto* enc = app.add_subcommand("encode", "encode a grid into a progressive stream");
  std::string enc_in, enc_out, enc_strategy = "expvar", enc_order_out;
  uint64_t enc_seed = 0, enc_clf_seed = 1;
  int enc_checkpoints = 16;
  bool enc_clamp = false, enc_transmit = false;
  uint32_t enc_classes = 10;
  enc->add_option("--in", enc_in, "input tensor")->required();
  enc->add_option("--out", enc_out, "output stream")->required();
  enc->add_option("--strategy", enc_strategy,
                  "expvar, sigma, random, oracle-channel, or oracle-patch");
  enc->add_option("--seed", enc_seed, "order seed (random strategy)");
  enc->add_option("--checkpoints", enc_checkpoints, "cut-table checkpoints per plane");
  enc->add_flag("--clamp-range", enc_clamp, "clamp coefficients past the symbol range");
  enc->add_flag("--transmit-order", enc_transmit, "embed the oracle group order");
  enc->add_option("--classes", enc_classes, "synthetic classifier classes (oracle strategies)");
  enc->add_option("--classifier-seed", enc_clf_seed, "synthetic classifier seed");
  enc->add_option("--order-out", enc_order_out, "write the oracle group order CSV here");

  // decode
  auto* dec = app.add_subcommand("decode", "decode a stream at a byte or level budget");
  std::string dec_in, dec_out, dec_budget = "full", dec_order_in, dec_ref;
  dec->add_option("--in", dec_in, "input stream")->required();
  dec->add_option("--out", dec_out, "output tensor");
  dec->add_option("--budget", dec_budget, "full, bytes:N, or level:K");
  dec->add_option("--order-in", dec_order_in, "oracle group order CSV");
  dec->add_option("--ref", dec_ref, "reference tensor for the error report");

  // priority
  auto* pri = app.add_subcommand("priority", "dump the transmission order");
  std::string pri_in, pri_out, pri_strategy = "expvar";
  uint64_t pri_seed = 0, pri_clf_seed = 1;
  bool pri_clamp = false;
  uint32_t pri_classes = 10;
  pri->add_option("--in", pri_in, "input tensor")->required();
  pri->add_option("--out", pri_out, "output CSV")->required();
  pri->add_option("--strategy", pri_strategy,
                  "expvar, sigma, random, oracle-channel, or oracle-patch");
  pri->add_option("--seed", pri_seed, "order seed (random strategy)");
  pri->add_flag("--clamp-range", pri_clamp, "clamp coefficients past the symbol range");
  pri->add_option("--classes", pri_classes, "synthetic classifier classes (oracle strategies)");
  pri->add_option("--classifier-seed", pri_clf_seed, "synthetic classifier seed");

  // rate-curve
  auto* rate = app.add_subcommand("rate-curve", "per-level rate table from a stream");
  std::string rate_in, rate_out;
  rate->add_option("--in", rate_in, "input stream")->required();
  rate->add_option("--out", rate_out, "output CSV")->required();

  // filter-train
  auto* ft = app.add_subcommand("filter-train", "train the confidence filter");
  BatchConfig ft_cfg;
  std::string ft_logits, ft_out, ft_logits_out;
  double ft_reg = 1e-4;
  add_batch_options(ft, ft_cfg);
  ft->add_option("--logits-csv", ft_logits, "train from an external logits CSV instead");
  ft->add_option("--logits-out", ft_logits_out, "dump the synthetic logit records as CSV");
  ft->add_option("--regularization", ft_reg, "L2 strength");
  ft->add_option("--out", ft_out, "output filter model")->required();

  // adaptive
  auto* ad = app.add_subcommand("adaptive", "threshold-stopped progressive decoding");
  BatchConfig ad_cfg;
  std::string ad_model, ad_tau = "0.7", ad_out;
  add_batch_options(ad, ad_cfg);
  ad->add_option("--model", ad_model, "filter model")->required();
  ad->add_option("--tau", ad_tau, "confidence thresholds, comma separated");
  ad->add_option("--out", ad_out, "trace CSV prefix")->required();

  // ece
  auto* ec = app.add_subcommand("ece", "calibration error of a filter on logits");
  std::string ec_logits, ec_model, ec_out;
  int ec_bins = 10;
  ec->add_option("--logits-csv", ec_logits, "logit records")->required();
  ec->add_option("--model", ec_model, "filter model")->required();
  ec->add_option("--bins", ec_bins, "equal-width bins");
  ec->add_option("--out", ec_out, "per-bin CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(gen)) return cmd_gen(gen_seed, gen_h, gen_w, gen_c, gen_law, gen_out);
    if (app.got_subcommand(enc))
      return cmd_encode(enc_in, enc_out, enc_strategy, enc_seed, enc_checkpoints, enc_clamp,
                        enc_transmit, enc_classes, enc_clf_seed, enc_order_out);
    if (app.got_subcommand(dec)) return cmd_decode(dec_in, dec_out, dec_budget, dec_order_in,
                                                   dec_ref);
    if (app.got_subcommand(pri))
      return cmd_priority(pri_in, pri_out, pri_strategy, pri_seed, pri_clamp, pri_classes,
                          pri_clf_seed);
    if (app.got_subcommand(rate)) return cmd_rate_curve(rate_in, rate_out);
    if (app.got_subcommand(ft))
      return cmd_filter_train(ft_cfg, ft_logits, ft_out, ft_reg, ft_logits_out);
    if (app.got_subcommand(ad)) return cmd_adaptive(ad_cfg, ad_model, ad_tau, ad_out);
    if (app.got_subcommand(ec)) return cmd_ece(ec_logits, ec_model, ec_bins, ec_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "picm: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "picm: " << e.what() << "\n";
    return exit_code_for(e.code);
  } catch (const std::exception& e) {
    std::cerr << "picm: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
