#pragma once

#include <string>
#include <vector>

#include "fisherfuse/errors.hpp"

namespace ff {

struct Confusion {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  long n() const { return tp + fp + tn + fn; }
};

struct Rates {
  double precision = 0, recall = 0, accuracy = 0, f1 = 0;
  bool precision_degenerate = false;  // tp + fp == 0
  bool recall_degenerate = false;     // tp + fn == 0
};

struct EceBin {
  double conf_mean = 0;
  double accuracy = 0;
  long count = 0;
};

struct EvalReport {
  Confusion counts;
  Rates rates;
  double ece = 0;
  std::vector<EceBin> bins;
  double alpha_mean = 0;
  double energy_ratio = 0;

  std::string to_json() const;
  static std::string csv_header();
  std::string to_csv_row() const;
};

/// Threshold 0.5 on p(vulnerable); positive class is label 1.
Confusion confusion(const std::vector<double>& probs, const std::vector<int>& truth);

Rates prf1(const Confusion& c);

/// Equal-width bins over predicted-class confidence in [0.5, 1].
double ece(const std::vector<double>& conf, const std::vector<bool>& correct,
           int bin_count, std::vector<EceBin>* out_bins = nullptr);

}  // namespace ff
