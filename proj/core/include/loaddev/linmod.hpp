#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace loaddev::linmod {

/// Role of a model term.  block and factor are both categorical main
/// effects; the distinction is bookkeeping (blocks are nuisance grouping).
enum class TermKind { block, factor, interaction, covariate };

/// One entry of a model formula.  A term owns the data columns it is built
/// from: one categorical column for block/factor, one numeric column for a
/// covariate, two or more categorical columns for an interaction.
struct Term {
  TermKind kind = TermKind::covariate;
  std::string name;                  // unique within a ModelSpec
  std::string display;               // label for human-readable tables
  std::vector<std::string> columns;  // source data columns
};

Term block_term(const std::string& column, const std::string& display = "");
Term factor_term(const std::string& column, const std::string& display = "");
Term interaction_term(const std::vector<std::string>& columns, const std::string& display = "");
Term covariate_term(const std::string& column, const std::string& display = "");

/// An ordered model.  Term order is significant: the sequential (Type I)
/// decomposition attributes to each term the residual-SS reduction obtained
/// by adding it after everything before it.  The intercept is always
/// present and is not listed.
struct ModelSpec {
  std::string response;
  std::vector<Term> terms;
};

/// Copy of `spec` with one covariate term appended per column, in order.
ModelSpec with_covariates(ModelSpec spec, const std::vector<std::string>& columns);

/// A data column: either numeric values or categorical codes into an
/// ordered list of declared levels.
struct Column {
  bool categorical = false;
  std::vector<double> values;       // numeric rows
  std::vector<int> codes;           // categorical rows, index into levels
  std::vector<std::string> levels;  // declared level labels, coding order
};

/// Column-oriented table feeding the model engine.  All columns must have
/// the same number of rows.
class DataTable {
 public:
  std::size_t nrows() const { return nrows_; }

  void add_numeric(const std::string& name, std::vector<double> values);

  /// Categorical column.  `declared_levels` fixes the coding order (first
  /// level is the reference); when empty, levels are taken in order of first
  /// appearance.  A label outside the declared levels is an error.
  void add_categorical(const std::string& name, const std::vector<std::string>& labels,
                       std::vector<std::string> declared_levels = {});

  bool has(const std::string& name) const;
  const Column& at(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }

 private:
  void add(const std::string& name, Column column);

  std::vector<std::string> names_;
  std::vector<Column> columns_;
  std::size_t nrows_ = 0;
  bool empty_ = true;
};

/// Design matrix plus the map from its columns back to model terms.
///
/// Layout: intercept first, then one contiguous column group per term in
/// ModelSpec order.  Categorical terms use reference-level indicator coding
/// (first declared observed level is the reference, k-1 indicator columns);
/// interaction columns are elementwise products of the constituent
/// indicators; covariates enter as-is, uncentered.
struct DesignInfo {
  Eigen::MatrixXd matrix;
  std::vector<int> term_of_column;  // -1 for the intercept
  std::vector<std::string> column_names;
  std::vector<std::string> warnings;
};

/// Builds the design matrix.  Errors: unknown or wrong-kind source columns,
/// missing values (named by row and column), categorical columns with fewer
/// than 2 observed levels.  A declared level that never occurs in the data
/// only reduces the term's degrees of freedom and adds a warning.
DesignInfo build_design_matrix(const ModelSpec& spec, const DataTable& data);

struct LeastSquaresFit {
  Eigen::VectorXd coefficients;  // minimum-norm solution when rank deficient
  double rss = 0.0;
  int residual_df = 0;  // rows - rank
  int rank = 0;
};

/// Minimum-norm least squares via a complete orthogonal decomposition with
/// column pivoting.  Handles rank deficiency; throws on zero rows or a
/// row-count mismatch with y.
LeastSquaresFit fit_least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// One line of an ANOVA table.  ms/f/p are absent where undefined (zero
/// degrees of freedom, zero residual mean square, or exhausted error df).
struct AnovaRow {
  std::string source;
  std::string display;
  int df = 0;
  double ss = 0.0;
  std::optional<double> ms;
  std::optional<double> f;
  std::optional<double> p;
};

/// Sequential decomposition of a fitted model: one row per term plus the
/// Model / Error / Corrected Total summary rows.  p-values are stored at
/// full double precision; display rounding is the front end's concern.
struct AnovaTable {
  std::string response;
  std::vector<AnovaRow> terms;
  AnovaRow model;
  AnovaRow error;
  AnovaRow total;
  std::vector<std::string> warnings;
};

/// Type I (sequential) analysis of variance.  For the j-th term,
/// SS_j = RSS(terms 1..j-1) - RSS(terms 1..j) and df_j is the rank increase
/// its columns contribute; every F statistic uses the full model's error
/// mean square as its denominator.  A term whose columns add no rank is
/// reported with df 0 and no F ("aliased", with a warning).
AnovaTable type1_anova(const ModelSpec& spec, const DataTable& data);

/// Analysis of covariance: identical sequential procedure; the model is
/// expected to carry covariate terms appended after the design factors.
AnovaTable type1_ancova(const ModelSpec& spec_with_covariates, const DataTable& data);

/// The decomposition core on an explicit design matrix.  Exposed so that
/// alternative codings of the same model subspace can be decomposed and
/// compared; `term_of_column` must be non-decreasing with -1 first for the
/// intercept block.
AnovaTable type1_decompose(const Eigen::MatrixXd& X, const std::vector<int>& term_of_column,
                           const std::vector<Term>& terms, const Eigen::VectorXd& y);

/// Machine-readable serialization (full precision).
std::string to_json(const AnovaTable& table);

/// Aligned text rendering: an overall block (Model / Error / Corrected
/// Total) followed by the per-term Type I block with columns
/// "Source  DF  Type I SS  Mean Square  F Value  Pr > F".
/// Sums of squares and mean squares are shown to 1 decimal, F to 2, p to 4.
std::string to_text(const AnovaTable& table);

}  // namespace loaddev::linmod
