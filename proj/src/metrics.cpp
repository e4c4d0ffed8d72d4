#include "fisherfuse/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"

namespace ff {

Confusion confusion(const std::vector<double>& probs, const std::vector<int>& truth) {
  if (probs.size() != truth.size())
    throw ShapeError("confusion: probs/truth length mismatch");
  Confusion c;
  for (size_t i = 0; i < probs.size(); ++i) {
    int pred = probs[i] >= 0.5 ? 1 : 0;
    if (pred == 1 && truth[i] == 1) ++c.tp;
    else if (pred == 1 && truth[i] == 0) ++c.fp;
    else if (pred == 0 && truth[i] == 0) ++c.tn;
    else ++c.fn;
  }
  return c;
}

Rates prf1(const Confusion& c) {
  if (c.n() == 0) throw ParameterError("prf1: empty confusion");
  Rates r;
  if (c.tp + c.fp == 0) {
    r.precision_degenerate = true;
  } else {
    r.precision = static_cast<double>(c.tp) / (c.tp + c.fp);
  }
  if (c.tp + c.fn == 0) {
    r.recall_degenerate = true;
  } else {
    r.recall = static_cast<double>(c.tp) / (c.tp + c.fn);
  }
  r.accuracy = static_cast<double>(c.tp + c.tn) / c.n();
  if (r.precision + r.recall > 0)
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

double ece(const std::vector<double>& conf, const std::vector<bool>& correct,
           int bin_count, std::vector<EceBin>* out_bins) {
  if (conf.size() != correct.size()) throw ShapeError("ece: length mismatch");
  if (bin_count < 1) throw ParameterError("ece: bins must be >= 1");
  const double lo = 0.5, hi = 1.0;
  std::vector<double> conf_sum(bin_count, 0.0), acc_sum(bin_count, 0.0);
  std::vector<long> counts(bin_count, 0);
  for (size_t i = 0; i < conf.size(); ++i) {
    double c = conf[i];
    if (c < lo || c > hi) throw ParameterError("ece: confidence outside [0.5, 1]");
    int b = static_cast<int>((c - lo) / (hi - lo) * bin_count);
    if (b == bin_count) b = bin_count - 1;  // c == 1.0 lands in the top bin
    conf_sum[b] += c;
    acc_sum[b] += correct[i] ? 1.0 : 0.0;
    ++counts[b];
  }
  double total = static_cast<double>(conf.size());
  double e = 0.0;
  if (out_bins) out_bins->assign(bin_count, EceBin{});
  for (int b = 0; b < bin_count; ++b) {
    if (counts[b] == 0) continue;
    double cm = conf_sum[b] / counts[b];
    double am = acc_sum[b] / counts[b];
    e += (counts[b] / total) * std::fabs(am - cm);
    if (out_bins) (*out_bins)[b] = EceBin{cm, am, counts[b]};
  }
  return e;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["counts"] = {{"tp", counts.tp}, {"fp", counts.fp}, {"tn", counts.tn}, {"fn", counts.fn}};
  j["precision"] = rates.precision;
  j["recall"] = rates.recall;
  j["accuracy"] = rates.accuracy;
  j["f1"] = rates.f1;
  j["precision_degenerate"] = rates.precision_degenerate;
  j["recall_degenerate"] = rates.recall_degenerate;
  j["ece"] = ece;
  j["alpha_mean"] = alpha_mean;
  j["energy_ratio"] = energy_ratio;
  nlohmann::json jb = nlohmann::json::array();
  for (const EceBin& b : bins)
    jb.push_back({{"conf_mean", b.conf_mean}, {"accuracy", b.accuracy}, {"count", b.count}});
  j["bins"] = jb;
  return j.dump(2);
}

std::string EvalReport::csv_header() {
  return "tp,fp,tn,fn,precision,recall,accuracy,f1,ece,alpha_mean,energy_ratio";
}

std::string EvalReport::to_csv_row() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%ld,%ld,%ld,%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                counts.tp, counts.fp, counts.tn, counts.fn, rates.precision, rates.recall,
                rates.accuracy, rates.f1, ece, alpha_mean, energy_ratio);
  return buf;
}

}  // namespace ff
