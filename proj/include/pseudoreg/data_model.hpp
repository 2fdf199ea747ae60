#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace pseudoreg {

enum class Status { censored = 0, event = 1 };

/// A covariate cell: numeric value or factor level label.
using CovariateValue = std::variant<double, std::string>;

struct SurvivalRecord {
  double time = 0.0;
  Status status = Status::censored;
  std::map<std::string, CovariateValue> covariates;

  bool is_event() const noexcept { return status == Status::event; }
};

/// An ordered sample of survival records. Record k is subject k.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<SurvivalRecord> records);

  std::size_t size() const noexcept { return records_.size(); }
  const SurvivalRecord& operator[](std::size_t k) const { return records_[k]; }
  const std::vector<SurvivalRecord>& records() const noexcept { return records_; }
  std::vector<std::string> covariate_names() const;
  std::size_t censored_count() const;

  /// Returns the dataset with records reordered as `order[k]` -> new position k.
  Dataset permuted(const std::vector<std::size_t>& order) const;

 private:
  std::vector<SurvivalRecord> records_;
};

enum class ColumnKind { numeric, factor };

/// Which CSV columns hold follow-up time and status, and how covariates are typed.
/// Covariate columns not listed in `kinds` are kept: numeric when every cell
/// parses as a number, factor otherwise.
struct CsvSchema {
  std::string time_column = "time";
  std::string status_column = "status";
  std::map<std::string, ColumnKind> kinds;
};

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
Dataset parse_csv(const std::string& text, const CsvSchema& schema = {});

struct NumericTerm {
  std::string column;
};

/// Reference-cell dummy coding. Without an explicit level order the
/// non-reference levels are used in lexicographic order.
struct FactorTerm {
  std::string column;
  std::string reference;
  std::vector<std::string> level_order;
};

/// Elementwise product of the encoded columns of its parents. A factor parent
/// contributes each of its dummy columns, so a term may expand to several columns.
struct InteractionTerm {
  std::vector<std::string> columns;
};

using DesignTerm = std::variant<NumericTerm, FactorTerm, InteractionTerm>;

struct DesignSpec {
  bool intercept = true;
  std::vector<DesignTerm> terms;
};

/// Resolved encoding: enough to encode new records exactly as the fit did.
struct DesignLayout {
  bool intercept = true;
  std::vector<DesignTerm> terms;
  std::map<std::string, std::vector<std::string>> factor_levels;  // non-reference levels, coded order
  std::map<std::string, std::string> factor_reference;
  std::vector<std::string> column_names;
};

struct DesignMatrix {
  Eigen::MatrixXd rows;
  std::vector<std::string> column_names;
  DesignLayout layout;

  Eigen::Index n() const noexcept { return rows.rows(); }
  Eigen::Index q() const noexcept { return rows.cols(); }
};

/// Encodes the covariates of `dataset` into an n x q design matrix.
DesignMatrix encode_design(const Dataset& dataset, const DesignSpec& spec);

/// Encodes `dataset` with a previously resolved layout. Levels unseen when the
/// layout was built are rejected.
DesignMatrix encode_with_layout(const Dataset& dataset, const DesignLayout& layout);

/// Closed-form column count for `spec` given the number of observed levels per factor.
std::size_t expected_column_count(const DesignSpec& spec,
                                  const std::map<std::string, std::size_t>& levels_per_factor);

/// Everything needed to go from a CSV file to a design: column roles and terms.
struct DataSchema {
  CsvSchema csv;
  DesignSpec design;
};

/// Reads a JSON schema document (see data/veteran.schema.json).
DataSchema load_schema(const std::filesystem::path& path);
DataSchema parse_schema(const std::string& json_text);

/// Schema used when none is supplied: intercept plus every covariate column,
/// string-valued columns as factors with their lexicographically first level as reference.
DataSchema infer_schema(const Dataset& dataset);

}  // namespace pseudoreg
