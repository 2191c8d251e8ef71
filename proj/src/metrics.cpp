#include "tamatch/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "tamatch/error.hpp"
#include "tamatch/format.hpp"

namespace tamatch {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    // trim surrounding whitespace
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? ""
                                           : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

}  // namespace

double utilization_ratio(const PseudoBatch& pb) {
  require(pb.batch_size() >= 1, ErrorCode::kEmptyBatch,
          "utilization of an empty batch");
  std::int64_t on = 0;
  for (auto m : pb.masks) on += m;
  return static_cast<double>(on) / static_cast<double>(pb.batch_size());
}

std::vector<std::optional<double>> per_class_accuracy(
    std::span<const std::int32_t> preds, std::span<const std::int32_t> truths,
    std::size_t classes) {
  require(preds.size() == truths.size(), ErrorCode::kDimensionMismatch,
          "prediction/truth length mismatch");
  std::vector<std::int64_t> correct(classes, 0), total(classes, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    require(truths[i] >= 0 && static_cast<std::size_t>(truths[i]) < classes &&
                preds[i] >= 0 && static_cast<std::size_t>(preds[i]) < classes,
            ErrorCode::kLabelOutOfRange, "label outside [0, C)");
    ++total[truths[i]];
    if (preds[i] == truths[i]) ++correct[truths[i]];
  }
  std::vector<std::optional<double>> acc(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    if (total[c] > 0) {
      acc[c] = static_cast<double>(correct[c]) / static_cast<double>(total[c]);
    }
  }
  return acc;
}

double error_rate(std::span<const std::int32_t> preds,
                  std::span<const std::int32_t> truths) {
  require(!preds.empty(), ErrorCode::kEmptyInput, "error_rate of empty input");
  require(preds.size() == truths.size(), ErrorCode::kDimensionMismatch,
          "prediction/truth length mismatch");
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == truths[i]) ++correct;
  }
  return 100.0 *
         (1.0 - static_cast<double>(correct) / static_cast<double>(preds.size()));
}

Aggregate seed_aggregate(std::span<const double> values) {
  require(!values.empty(), ErrorCode::kEmptyInput, "aggregate of no values");
  Aggregate agg;
  double sum = 0.0;
  for (double v : values) sum += v;
  agg.mean = sum / static_cast<double>(values.size());
  if (values.size() == 1) {
    agg.stddev = 0.0;
    agg.single_sample = true;
    return agg;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - agg.mean) * (v - agg.mean);
  agg.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return agg;
}

void ErrorTable::validate() const {
  require(methods.size() >= 2, ErrorCode::kMalformedTable,
          "need at least 2 methods");
  require(!tasks.empty(), ErrorCode::kMalformedTable, "need at least 1 task");
  require(error.size() == methods.size(), ErrorCode::kMalformedTable,
          "row count does not match method count");
  for (const auto& row : error) {
    require(row.size() == tasks.size(), ErrorCode::kMalformedTable,
            "row width does not match task count");
    for (double e : row) {
      require(std::isfinite(e) && e >= 0.0 && e <= 100.0,
              ErrorCode::kMalformedTable,
              "error cells must be percentages in [0, 100]");
    }
  }
}

std::vector<double> friedman_rank(const ErrorTable& table) {
  table.validate();
  const std::size_t m = table.methods.size();
  const std::size_t t = table.tasks.size();
  std::vector<double> rank_sum(m, 0.0);
  std::vector<std::size_t> order(m);
  for (std::size_t task = 0; task < t; ++task) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return table.error[a][task] < table.error[b][task];
                     });
    // Tied runs share the average of the positions they occupy.
    std::size_t i = 0;
    while (i < m) {
      std::size_t j = i;
      while (j + 1 < m &&
             table.error[order[j + 1]][task] == table.error[order[i]][task]) {
        ++j;
      }
      const double avg_rank = static_cast<double>(i + j + 2) / 2.0;  // 1-based
      for (std::size_t k = i; k <= j; ++k) rank_sum[order[k]] += avg_rank;
      i = j + 1;
    }
  }
  for (double& r : rank_sum) r /= static_cast<double>(t);
  return rank_sum;
}

ErrorTable load_error_table(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIoError, "cannot open table " + path);
  ErrorTable table;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kMalformedTable,
          "empty table file");
  auto header = split_csv_line(line);
  require(header.size() >= 2, ErrorCode::kMalformedTable,
          "header needs a method column plus at least one task");
  table.tasks.assign(header.begin() + 1, header.end());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    require(cells.size() == header.size(), ErrorCode::kMalformedTable,
            "row width differs from header in " + path);
    table.methods.push_back(cells[0]);
    std::vector<double> row;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(cells[i], &pos));
        require(pos == cells[i].size(), ErrorCode::kMalformedTable,
                "trailing characters in cell '" + cells[i] + "'");
      } catch (const std::logic_error&) {
        throw Error(ErrorCode::kMalformedTable,
                    "non-numeric cell '" + cells[i] + "' in " + path);
      }
    }
    table.error.push_back(std::move(row));
  }
  table.validate();
  return table;
}

std::string error_table_to_csv(const ErrorTable& table) {
  table.validate();
  std::string out = "method";
  for (const auto& t : table.tasks) out += "," + t;
  out += "\n";
  for (std::size_t m = 0; m < table.methods.size(); ++m) {
    out += table.methods[m];
    for (double e : table.error[m]) out += "," + format_double(e);
    out += "\n";
  }
  return out;
}

double kl_to_truth(const SimplexVector& p_model, const SimplexVector& p_truth) {
  return kl_divergence(p_model, p_truth);
}

}  // namespace tamatch
