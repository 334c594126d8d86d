#pragma once

// Fixed-effects design construction: z-scoring, contrast coding, and the
// predictor distribution summary.

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace uidpipe {

struct ColumnStats {
  double mean = 0.0;
  double sd = 1.0;  // population (1/n)
};

struct Standardized {
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // n x p
  std::vector<ColumnStats> stats;

  /// Maps z-scores back to the original scale.
  Eigen::MatrixXd inverse(const Eigen::MatrixXd& z) const;
};

/// z-scores each column with its mean and population sd. Throws
/// DegenerateColumnError naming the first constant column.
Standardized standardize(const std::vector<std::string>& names, const Eigen::MatrixXd& columns);

/// levels x (levels - 1) successive-difference contrasts: coefficient j
/// estimates mean(level j+1) - mean(level j).
Eigen::MatrixXd successive_difference_contrasts(int levels);

enum class TermKind { Continuous, Binary, SuccessiveDifference };

struct TermSpec {
  std::string name;  // column label prefix in the design
  std::string source;  // column in the DataTable
  TermKind kind = TermKind::Continuous;
  // Binary: {positive (+0.5), negative (-0.5)}. Factor: ordered levels.
  std::vector<std::string> levels;
};

struct DataTable {
  std::size_t rows = 0;
  std::map<std::string, std::vector<double>> numeric;
  std::map<std::string, std::vector<std::string>> categorical;

  void add(const std::string& name, std::vector<double> values);
  void add(const std::string& name, std::vector<std::string> values);
};

struct DesignMatrix {
  std::vector<std::string> column_names;  // first is "(Intercept)"
  Eigen::MatrixXd values;
  std::map<std::string, ColumnStats> standardization;
  std::vector<std::pair<std::string, std::string>> coding;  // term -> description
  std::map<std::string, std::vector<int>> term_columns;

  int column(const std::string& name) const;
  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  /// Keeps the intercept and the named terms, in the given order.
  DesignMatrix select_terms(const std::vector<std::string>& terms) const;
};

DesignMatrix encode(const DataTable& data, const std::vector<TermSpec>& terms);

struct LevelShare {
  std::string level;
  std::size_t count = 0;
  double percent = 0.0;
};

struct PredictorDistribution {
  std::string name;
  std::string type;  // "Continuous", "Binary", "Categorical (4 levels)"
  std::vector<LevelShare> levels;  // empty for continuous
  double mean = 0.0, sd = 0.0;     // continuous only
};

std::vector<PredictorDistribution> distributions(const DataTable& data,
                                                 const std::vector<TermSpec>& terms);

}  // namespace uidpipe
