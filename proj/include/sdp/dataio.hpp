#pragma once

#include <span>
#include <string>
#include <vector>

#include "sdp/nnet.hpp"
#include "sdp/synth.hpp"
#include "sdp/types.hpp"

namespace sdp {

// which CSV columns are features and which are targets, plus bins per
// target dimension for discretization
struct Schema {
  std::vector<std::string> features;
  std::vector<std::string> targets;
  std::vector<int> bins;  // one per target column
};

struct TabularDataset {
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;
  Mat X;                             // raw (unstandardized) features
  std::vector<long> y;               // flat grid targets
  GridShape shape;
  std::vector<Embedding> embedding;  // per target dimension
  std::vector<int> fold;             // fold id per row, empty until assigned
  long size() const { return static_cast<long>(y.size()); }
};

// strict numeric CSV: header row, comma separators, no missing values;
// errors carry row/column context
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};
CsvTable read_csv(const std::string& path);

TabularDataset load_csv(const std::string& path, const Schema& schema);

/*  Equal-width binning of [min, max] onto {0..bins-1}; values at max map to
 *  the last bin and midpoint ties round up. Integer-valued columns whose
 *  range already equals the requested grid pass through unchanged.  */
std::pair<std::vector<int>, Embedding> discretize_targets(std::span<const double> raw, int bins);

// seeded shuffle then contiguous blocks; fold sizes differ by at most one
void assign_kfold(TabularDataset& data, int folds, uint64_t seed);

struct TrialSplit {
  std::vector<int> train, val, test;
};

// held-out fold is the test set; a seeded 20% (val_fraction) of the
// remaining rows becomes validation
TrialSplit cv_trial(const TabularDataset& data, int fold, double val_fraction, uint64_t seed);

// per-column standardization fitted on training rows only
struct Standardizer {
  std::vector<double> mean, sd;
  void fit(const Mat& x, std::span<const int> rows);
  Mat apply(const Mat& x) const;
};

// training view with standardized features
Dataset to_dataset(const TabularDataset& data, const Standardizer& std);

void write_dataset_csv(const std::string& path, const Dataset& data);

}  // namespace sdp
