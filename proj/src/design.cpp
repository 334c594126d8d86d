#include "uidpipe/design.hpp"

#include <algorithm>
#include <cmath>

#include "uidpipe/error.hpp"

namespace uidpipe {

Eigen::MatrixXd Standardized::inverse(const Eigen::MatrixXd& z) const {
  Eigen::MatrixXd x = z;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const auto& s = stats[static_cast<std::size_t>(j)];
    x.col(j) = (x.col(j).array() * s.sd + s.mean).matrix();
  }
  return x;
}

Standardized standardize(const std::vector<std::string>& names, const Eigen::MatrixXd& columns) {
  if (static_cast<Eigen::Index>(names.size()) != columns.cols()) {
    throw ArgumentError("standardize: name count does not match column count");
  }
  if (columns.rows() == 0) throw ArgumentError("standardize: no rows");
  Standardized out;
  out.names = names;
  out.values.resize(columns.rows(), columns.cols());
  const double n = static_cast<double>(columns.rows());
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    double mean = columns.col(j).mean();
    double var = (columns.col(j).array() - mean).square().sum() / n;
    double sd = std::sqrt(var);
    // Relative floor: a column of identical values can pick up rounding noise.
    double scale = std::max(1.0, columns.col(j).cwiseAbs().maxCoeff());
    if (!(sd > 1e-12 * scale)) throw DegenerateColumnError(names[static_cast<std::size_t>(j)]);
    out.values.col(j) = ((columns.col(j).array() - mean) / sd).matrix();
    out.stats.push_back({mean, sd});
  }
  return out;
}

Eigen::MatrixXd successive_difference_contrasts(int levels) {
  if (levels < 2) throw ArgumentError("contrasts need at least two levels");
  const double k = levels;
  Eigen::MatrixXd c(levels, levels - 1);
  for (int i = 0; i < levels; ++i) {
    for (int j = 0; j < levels - 1; ++j) {
      // Levels up to and including j sit below the (j, j+1) step.
      c(i, j) = i <= j ? -(k - (j + 1)) / k : (j + 1) / k;
    }
  }
  return c;
}

void DataTable::add(const std::string& name, std::vector<double> values) {
  if (rows == 0 && numeric.empty() && categorical.empty()) rows = values.size();
  if (values.size() != rows) throw ArgumentError("column '" + name + "' has wrong length");
  numeric[name] = std::move(values);
}

void DataTable::add(const std::string& name, std::vector<std::string> values) {
  if (rows == 0 && numeric.empty() && categorical.empty()) rows = values.size();
  if (values.size() != rows) throw ArgumentError("column '" + name + "' has wrong length");
  categorical[name] = std::move(values);
}

int DesignMatrix::column(const std::string& name) const {
  auto it = std::find(column_names.begin(), column_names.end(), name);
  if (it == column_names.end()) throw ArgumentError("no design column '" + name + "'");
  return static_cast<int>(it - column_names.begin());
}

DesignMatrix DesignMatrix::select_terms(const std::vector<std::string>& terms) const {
  std::vector<int> cols{0};
  DesignMatrix out;
  out.column_names.push_back(column_names.front());
  for (const auto& term : terms) {
    auto it = term_columns.find(term);
    if (it == term_columns.end()) throw ArgumentError("no design term '" + term + "'");
    std::vector<int> mapped;
    for (int c : it->second) {
      mapped.push_back(static_cast<int>(cols.size()));
      cols.push_back(c);
      out.column_names.push_back(column_names[static_cast<std::size_t>(c)]);
    }
    out.term_columns[term] = mapped;
    for (const auto& [t, d] : coding)
      if (t == term) out.coding.emplace_back(t, d);
    auto st = standardization.find(term);
    if (st != standardization.end()) out.standardization.insert(*st);
  }
  out.values.resize(values.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.values.col(static_cast<Eigen::Index>(j)) = values.col(cols[j]);
  return out;
}

namespace {

const std::vector<std::string>& categorical_column(const DataTable& data, const TermSpec& t) {
  auto it = data.categorical.find(t.source);
  if (it == data.categorical.end()) {
    throw ArgumentError("term '" + t.name + "' needs categorical column '" + t.source + "'");
  }
  return it->second;
}

int level_of(const TermSpec& t, const std::string& value) {
  auto it = std::find(t.levels.begin(), t.levels.end(), value);
  if (it == t.levels.end()) {
    throw CodingError("term '" + t.name + "' has unseen level '" + value + "'");
  }
  return static_cast<int>(it - t.levels.begin());
}

}  // namespace

DesignMatrix encode(const DataTable& data, const std::vector<TermSpec>& terms) {
  const auto n = static_cast<Eigen::Index>(data.rows);
  std::vector<Eigen::VectorXd> cols{Eigen::VectorXd::Ones(n)};
  DesignMatrix dm;
  dm.column_names.push_back("(Intercept)");

  auto push = [&](const std::string& term, const std::string& name, Eigen::VectorXd col) {
    if (n > 0 && (col.array() == col(0)).all()) throw DegenerateColumnError(name);
    dm.term_columns[term].push_back(static_cast<int>(cols.size()));
    dm.column_names.push_back(name);
    cols.push_back(std::move(col));
  };

  for (const auto& t : terms) {
    switch (t.kind) {
      case TermKind::Continuous: {
        auto it = data.numeric.find(t.source);
        if (it == data.numeric.end()) {
          throw ArgumentError("term '" + t.name + "' needs numeric column '" + t.source + "'");
        }
        Eigen::Map<const Eigen::VectorXd> raw(it->second.data(), n);
        auto z = standardize({t.name}, raw);
        dm.standardization[t.name] = z.stats.front();
        dm.coding.emplace_back(t.name, "z-score (population sd)");
        push(t.name, t.name, z.values.col(0));
        break;
      }
      case TermKind::Binary: {
        if (t.levels.size() != 2) throw ArgumentError("binary term '" + t.name + "' needs 2 levels");
        const auto& values = categorical_column(data, t);
        Eigen::VectorXd col(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          col(i) = level_of(t, values[static_cast<std::size_t>(i)]) == 0 ? 0.5 : -0.5;
        }
        dm.coding.emplace_back(t.name, t.levels[0] + " = +0.5, " + t.levels[1] + " = -0.5");
        push(t.name, t.name, std::move(col));
        break;
      }
      case TermKind::SuccessiveDifference: {
        const int k = static_cast<int>(t.levels.size());
        const auto& values = categorical_column(data, t);
        Eigen::MatrixXd contrasts = successive_difference_contrasts(k);
        Eigen::MatrixXd block(n, k - 1);
        for (Eigen::Index i = 0; i < n; ++i) {
          block.row(i) = contrasts.row(level_of(t, values[static_cast<std::size_t>(i)]));
        }
        std::string desc = "successive differences:";
        for (int j = 0; j + 1 < k; ++j) {
          desc += " " + t.levels[static_cast<std::size_t>(j + 1)] + " vs " +
                  t.levels[static_cast<std::size_t>(j)] + (j + 2 < k ? ";" : "");
          push(t.name, t.name + " " + std::to_string(j + 2) + "-" + std::to_string(j + 1),
               block.col(j));
        }
        dm.coding.emplace_back(t.name, desc);
        break;
      }
    }
  }
  dm.values.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) dm.values.col(static_cast<Eigen::Index>(j)) = cols[j];
  return dm;
}

std::vector<PredictorDistribution> distributions(const DataTable& data,
                                                 const std::vector<TermSpec>& terms) {
  std::vector<PredictorDistribution> out;
  const double n = static_cast<double>(data.rows);
  for (const auto& t : terms) {
    PredictorDistribution d;
    d.name = t.name;
    if (t.kind == TermKind::Continuous) {
      d.type = "Continuous";
      const auto& v = data.numeric.at(t.source);
      Eigen::Map<const Eigen::VectorXd> col(v.data(), static_cast<Eigen::Index>(v.size()));
      if (!v.empty()) {
        d.mean = col.mean();
        d.sd = std::sqrt((col.array() - d.mean).square().mean());
      }
    } else {
      d.type = t.kind == TermKind::Binary
                   ? "Binary"
                   : "Categorical (" + std::to_string(t.levels.size()) + " levels)";
      const auto& v = categorical_column(data, t);
      for (const auto& level : t.levels) {
        auto count = static_cast<std::size_t>(std::count(v.begin(), v.end(), level));
        d.levels.push_back({level, count, n > 0 ? 100.0 * static_cast<double>(count) / n : 0.0});
      }
      for (const auto& value : v) level_of(t, value);
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace uidpipe
