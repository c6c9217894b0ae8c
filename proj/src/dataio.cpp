#include "sdp/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sdp/rng.hpp"

namespace sdp {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw data_error(path + ": empty file");
  for (const auto& c : split_line(line)) table.columns.push_back(trim(c));

  long row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != table.columns.size())
      throw data_error(path + ": row " + std::to_string(row_no) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(table.columns.size()));
    std::vector<double> row(fields.size());
    for (size_t c = 0; c < fields.size(); ++c) {
      std::string f = trim(fields[c]);
      if (f.empty())
        throw data_error(path + ": missing value at row " + std::to_string(row_no) +
                         ", column '" + table.columns[c] + "'");
      size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(f, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != f.size())
        throw data_error(path + ": non-numeric value '" + f + "' at row " +
                         std::to_string(row_no) + ", column '" + table.columns[c] + "'");
      row[c] = v;
    }
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) throw data_error(path + ": no data rows");
  return table;
}

std::pair<std::vector<int>, Embedding> discretize_targets(std::span<const double> raw,
                                                          int bins) {
  if (bins < 2) throw std::invalid_argument("discretize_targets: bins must be >= 2");
  if (raw.empty()) throw data_error("discretize_targets: empty column");
  double lo = raw[0], hi = raw[0];
  bool integral = true;
  for (double v : raw) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    if (v != std::floor(v)) integral = false;
  }
  if (hi == lo) throw data_error("discretize_targets: constant target column");

  std::vector<int> out(raw.size());
  if (integral && hi - lo + 1 == bins) {
    // already on the grid; pass through with an identity embedding
    for (size_t i = 0; i < raw.size(); ++i) out[i] = static_cast<int>(raw[i] - lo);
    Embedding emb{lo, hi, bins};
    return {out, emb};
  }
  double width = (hi - lo) / bins;
  for (size_t i = 0; i < raw.size(); ++i) {
    int b = static_cast<int>(std::floor((raw[i] - lo) / width));
    out[i] = std::clamp(b, 0, bins - 1);
  }
  // embedding reports cell centers: center(j) = lo + (j + 0.5) * width
  Embedding emb{lo + 0.5 * width, hi - 0.5 * width, bins};
  return {out, emb};
}

TabularDataset load_csv(const std::string& path, const Schema& schema) {
  if (schema.targets.empty()) throw config_error("load_csv: schema needs target columns");
  if (schema.bins.size() != schema.targets.size())
    throw config_error("load_csv: need one bin count per target column");
  CsvTable table = read_csv(path);

  auto col_index = [&](const std::string& name) {
    for (size_t c = 0; c < table.columns.size(); ++c)
      if (table.columns[c] == name) return static_cast<int>(c);
    throw data_error(path + ": missing column '" + name + "'");
  };

  std::vector<std::string> features = schema.features;
  if (features.empty()) {
    for (const auto& c : table.columns)
      if (std::find(schema.targets.begin(), schema.targets.end(), c) == schema.targets.end())
        features.push_back(c);
  }
  if (features.empty()) throw config_error("load_csv: no feature columns");

  TabularDataset data;
  data.feature_names = features;
  data.target_names = schema.targets;
  const long n = static_cast<long>(table.rows.size());
  data.X = Mat(static_cast<int>(n), static_cast<int>(features.size()));
  for (size_t f = 0; f < features.size(); ++f) {
    int c = col_index(features[f]);
    for (long i = 0; i < n; ++i) data.X.at(static_cast<int>(i), static_cast<int>(f)) =
        table.rows[i][c];
  }

  const int d = static_cast<int>(schema.targets.size());
  std::vector<std::vector<int>> coords(d);
  std::vector<int> dims(d);
  for (int k = 0; k < d; ++k) {
    int c = col_index(schema.targets[k]);
    std::vector<double> raw(n);
    for (long i = 0; i < n; ++i) raw[i] = table.rows[i][c];
    auto [binned, emb] = discretize_targets(raw, schema.bins[k]);
    coords[k] = std::move(binned);
    data.embedding.push_back(emb);
    dims[k] = schema.bins[k];
  }
  data.shape = GridShape(dims);
  data.y.resize(n);
  GridCoord y(d);
  for (long i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) y[k] = coords[k][i];
    data.y[i] = data.shape.flatten(y);
  }
  return data;
}

void assign_kfold(TabularDataset& data, int folds, uint64_t seed) {
  const long n = data.size();
  if (folds < 2) throw config_error("kfold: folds must be >= 2");
  if (n < folds) throw config_error("kfold: fewer rows than folds");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed_mix({seed, 0xF01D5}));
  rng.shuffle(order);
  data.fold.assign(n, 0);
  // contiguous blocks of the shuffled order; sizes differ by at most 1
  long base = n / folds, extra = n % folds, pos = 0;
  for (int f = 0; f < folds; ++f) {
    long len = base + (f < extra ? 1 : 0);
    for (long i = 0; i < len; ++i) data.fold[order[pos++]] = f;
  }
}

TrialSplit cv_trial(const TabularDataset& data, int fold, double val_fraction, uint64_t seed) {
  if (data.fold.empty()) throw config_error("cv_trial: folds not assigned");
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw config_error("cv_trial: validation fraction must be in (0, 1)");
  TrialSplit split;
  std::vector<int> rest;
  for (long i = 0; i < data.size(); ++i) {
    if (data.fold[i] == fold)
      split.test.push_back(static_cast<int>(i));
    else
      rest.push_back(static_cast<int>(i));
  }
  if (split.test.empty() || rest.empty()) throw config_error("cv_trial: empty fold split");
  Rng rng(seed_mix({seed, static_cast<uint64_t>(fold), 0x7A1}));
  rng.shuffle(rest);
  long n_val = std::max<long>(1, std::lround(val_fraction * static_cast<double>(rest.size())));
  if (n_val >= static_cast<long>(rest.size()))
    throw config_error("cv_trial: not enough rows for a train split");
  split.val.assign(rest.begin(), rest.begin() + n_val);
  split.train.assign(rest.begin() + n_val, rest.end());
  return split;
}

void Standardizer::fit(const Mat& x, std::span<const int> rows) {
  mean.assign(x.cols, 0.0);
  sd.assign(x.cols, 0.0);
  if (rows.empty()) throw config_error("Standardizer: no rows");
  for (int i : rows)
    for (int c = 0; c < x.cols; ++c) mean[c] += x.at(i, c);
  for (int c = 0; c < x.cols; ++c) mean[c] /= static_cast<double>(rows.size());
  for (int i : rows)
    for (int c = 0; c < x.cols; ++c) {
      double d = x.at(i, c) - mean[c];
      sd[c] += d * d;
    }
  for (int c = 0; c < x.cols; ++c) {
    sd[c] = std::sqrt(sd[c] / static_cast<double>(rows.size()));
    if (sd[c] == 0.0) sd[c] = 1.0;  // constant feature passes through centered
  }
}

Mat Standardizer::apply(const Mat& x) const {
  Mat out(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int c = 0; c < x.cols; ++c) out.at(i, c) = (x.at(i, c) - mean[c]) / sd[c];
  return out;
}

Dataset to_dataset(const TabularDataset& data, const Standardizer& std) {
  Dataset out;
  out.X = std.apply(data.X);
  out.y = data.y;
  out.shape = data.shape;
  return out;
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  const int d = data.shape.ndim();
  for (int c = 0; c < data.X.cols; ++c) out << "x" << (c + 1) << ",";
  for (int k = 0; k < d; ++k) out << "y" << (k + 1) << (k + 1 < d ? "," : "\n");
  char buf[64];
  for (long i = 0; i < data.size(); ++i) {
    for (int c = 0; c < data.X.cols; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g,", data.X.at(static_cast<int>(i), c));
      out << buf;
    }
    for (int k = 0; k < d; ++k)
      out << data.shape.coord_along(data.y[i], k) << (k + 1 < d ? "," : "\n");
  }
}

}  // namespace sdp
