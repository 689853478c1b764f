#include "loaddev/linmod.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "loaddev/errors.hpp"
#include "loaddev/fdist.hpp"

namespace loaddev::linmod {

namespace {

using ordered_json = nlohmann::ordered_json;

Term make_term(TermKind kind, std::vector<std::string> columns, std::string display) {
  Term t;
  t.kind = kind;
  t.name = columns.front();
  for (std::size_t i = 1; i < columns.size(); ++i) t.name += "*" + columns[i];
  t.display = display.empty() ? t.name : std::move(display);
  t.columns = std::move(columns);
  return t;
}

// Indicator matrix (k-1 columns) for the observed non-reference levels of a
// categorical column; `observed` maps observed level -> declared label.
struct IndicatorSet {
  std::vector<Eigen::VectorXd> columns;
  std::vector<std::string> labels;
};

IndicatorSet indicators_for(const std::string& col_name, const Column& col,
                            std::vector<std::string>* warnings) {
  const std::size_t n = col.codes.size();
  std::set<int> present(col.codes.begin(), col.codes.end());
  if (present.size() < 2) {
    throw ValidationError("categorical column '" + col_name +
                          "' has fewer than 2 observed levels");
  }
  if (present.size() < col.levels.size() && warnings != nullptr) {
    for (std::size_t lev = 0; lev < col.levels.size(); ++lev) {
      if (!present.count(static_cast<int>(lev))) {
        warnings->push_back("level '" + col.levels[lev] + "' of '" + col_name +
                            "' not observed; degrees of freedom reduced");
      }
    }
  }

  // Reference = first observed level in declared order.
  std::vector<int> observed(present.begin(), present.end());
  std::sort(observed.begin(), observed.end());

  IndicatorSet set;
  for (std::size_t i = 1; i < observed.size(); ++i) {
    Eigen::VectorXd ind = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
      if (col.codes[r] == observed[i]) ind[static_cast<Eigen::Index>(r)] = 1.0;
    }
    set.columns.push_back(std::move(ind));
    set.labels.push_back(col_name + "=" + col.levels[static_cast<std::size_t>(observed[i])]);
  }
  return set;
}

void check_no_missing(const std::string& name, const Column& col, const std::string& use) {
  if (col.categorical) {
    for (std::size_t r = 0; r < col.codes.size(); ++r) {
      if (col.codes[r] < 0 || col.codes[r] >= static_cast<int>(col.levels.size())) {
        throw ValidationError("missing value in column '" + name + "' row " +
                              std::to_string(r + 1) + " (" + use + ")");
      }
    }
  } else {
    for (std::size_t r = 0; r < col.values.size(); ++r) {
      if (!std::isfinite(col.values[r])) {
        throw ValidationError("missing value in column '" + name + "' row " +
                              std::to_string(r + 1) + " (" + use + ")");
      }
    }
  }
}

const Column& categorical_column(const DataTable& data, const std::string& name,
                                 const std::string& term) {
  const Column& col = data.at(name);
  if (!col.categorical) {
    throw ValidationError("term '" + term + "' needs categorical column '" + name + "'");
  }
  check_no_missing(name, col, "term " + term);
  return col;
}

struct PrefixFit {
  int rank = 0;
  double rss = 0.0;
};

PrefixFit fit_prefix(const Eigen::MatrixXd& X, Eigen::Index cols, const Eigen::VectorXd& y) {
  const auto block = X.leftCols(cols);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(block);
  PrefixFit fit;
  fit.rank = static_cast<int>(cod.rank());
  fit.rss = (y - block * cod.solve(y)).squaredNorm();
  return fit;
}

std::string fmt(double v, int decimals) {
  if (v == 0.0) v = 0.0;  // normalize -0.0
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return std::string(buf);
}

void append_text_block(std::string& out, const std::string& ss_header,
                       const std::vector<const AnovaRow*>& rows) {
  const std::vector<std::string> headers = {"Source", "DF", ss_header, "Mean Square",
                                            "F Value", "Pr > F"};
  std::size_t source_w = headers[0].size();
  for (const auto* row : rows) source_w = std::max(source_w, row->display.size());

  auto cell = [](const std::string& text, std::size_t width, bool left) {
    std::string s = text;
    if (s.size() < width) {
      s.insert(left ? s.size() : 0, width - s.size(), ' ');
    }
    return s;
  };
  const std::size_t widths[] = {source_w, 5, 16, 14, 10, 9};

  out += cell(headers[0], widths[0], true);
  for (int i = 1; i < 6; ++i) out += cell(headers[static_cast<std::size_t>(i)], widths[i], false);
  out += '\n';

  for (const auto* row : rows) {
    out += cell(row->display, widths[0], true);
    out += cell(std::to_string(row->df), widths[1], false);
    out += cell(fmt(row->ss, 1), widths[2], false);
    out += cell(row->ms ? fmt(*row->ms, 1) : "", widths[3], false);
    out += cell(row->f ? fmt(*row->f, 2) : "", widths[4], false);
    out += cell(row->p ? fmt(*row->p, 4) : "", widths[5], false);
    // trailing spaces would vary with blank cells; trim them
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
  }
}

ordered_json row_json(const AnovaRow& row) {
  ordered_json j;
  j["source"] = row.source;
  j["display"] = row.display;
  j["df"] = row.df;
  j["ss"] = row.ss;
  j["ms"] = row.ms ? ordered_json(*row.ms) : ordered_json(nullptr);
  j["f"] = row.f ? ordered_json(*row.f) : ordered_json(nullptr);
  j["p"] = row.p ? ordered_json(*row.p) : ordered_json(nullptr);
  return j;
}

}  // namespace

Term block_term(const std::string& column, const std::string& display) {
  return make_term(TermKind::block, {column}, display);
}

Term factor_term(const std::string& column, const std::string& display) {
  return make_term(TermKind::factor, {column}, display);
}

Term interaction_term(const std::vector<std::string>& columns, const std::string& display) {
  if (columns.size() < 2) {
    throw ValidationError("interaction term needs at least 2 factors");
  }
  std::set<std::string> unique(columns.begin(), columns.end());
  if (unique.size() != columns.size()) {
    throw ValidationError("interaction term factors must be distinct");
  }
  return make_term(TermKind::interaction, columns, display);
}

Term covariate_term(const std::string& column, const std::string& display) {
  return make_term(TermKind::covariate, {column}, display);
}

ModelSpec with_covariates(ModelSpec spec, const std::vector<std::string>& columns) {
  for (const auto& c : columns) spec.terms.push_back(covariate_term(c));
  return spec;
}

void DataTable::add(const std::string& name, Column column) {
  if (has(name)) {
    throw ValidationError("duplicate column '" + name + "'");
  }
  const std::size_t rows = column.categorical ? column.codes.size() : column.values.size();
  if (empty_) {
    nrows_ = rows;
    empty_ = false;
  } else if (rows != nrows_) {
    throw ValidationError("column '" + name + "' has " + std::to_string(rows) +
                          " rows, table has " + std::to_string(nrows_));
  }
  names_.push_back(name);
  columns_.push_back(std::move(column));
}

void DataTable::add_numeric(const std::string& name, std::vector<double> values) {
  Column col;
  col.categorical = false;
  col.values = std::move(values);
  add(name, std::move(col));
}

void DataTable::add_categorical(const std::string& name, const std::vector<std::string>& labels,
                                std::vector<std::string> declared_levels) {
  Column col;
  col.categorical = true;
  col.levels = std::move(declared_levels);
  if (col.levels.empty()) {
    for (const auto& label : labels) {
      if (std::find(col.levels.begin(), col.levels.end(), label) == col.levels.end()) {
        col.levels.push_back(label);
      }
    }
  }
  col.codes.reserve(labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const auto it = std::find(col.levels.begin(), col.levels.end(), labels[r]);
    if (it == col.levels.end()) {
      throw ValidationError("column '" + name + "' row " + std::to_string(r + 1) + ": label '" +
                            labels[r] + "' is not a declared level");
    }
    col.codes.push_back(static_cast<int>(it - col.levels.begin()));
  }
  add(name, std::move(col));
}

bool DataTable::has(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const Column& DataTable::at(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) {
    throw ValidationError("no such column: '" + name + "'");
  }
  return columns_[static_cast<std::size_t>(it - names_.begin())];
}

DesignInfo build_design_matrix(const ModelSpec& spec, const DataTable& data) {
  std::set<std::string> term_names;
  for (const auto& term : spec.terms) {
    if (!term_names.insert(term.name).second) {
      throw ValidationError("duplicate term '" + term.name + "'");
    }
  }
  const std::size_t n = data.nrows();
  if (n == 0) {
    throw ValidationError("data table has no rows");
  }

  DesignInfo info;
  std::vector<Eigen::VectorXd> cols;
  cols.push_back(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)));
  info.term_of_column.push_back(-1);
  info.column_names.push_back("(intercept)");

  for (std::size_t t = 0; t < spec.terms.size(); ++t) {
    const Term& term = spec.terms[t];
    switch (term.kind) {
      case TermKind::block:
      case TermKind::factor: {
        const Column& col = categorical_column(data, term.columns.front(), term.name);
        IndicatorSet set = indicators_for(term.columns.front(), col, &info.warnings);
        for (std::size_t i = 0; i < set.columns.size(); ++i) {
          cols.push_back(std::move(set.columns[i]));
          info.term_of_column.push_back(static_cast<int>(t));
          info.column_names.push_back(set.labels[i]);
        }
        break;
      }
      case TermKind::covariate: {
        const Column& col = data.at(term.columns.front());
        if (col.categorical) {
          throw ValidationError("term '" + term.name + "' needs numeric column '" +
                                term.columns.front() + "'");
        }
        check_no_missing(term.columns.front(), col, "term " + term.name);
        cols.push_back(Eigen::Map<const Eigen::VectorXd>(col.values.data(),
                                                         static_cast<Eigen::Index>(n)));
        info.term_of_column.push_back(static_cast<int>(t));
        info.column_names.push_back(term.columns.front());
        break;
      }
      case TermKind::interaction: {
        // Cross product of the constituent factors' indicator sets, first
        // factor slowest, matching nested loops over its levels.
        std::vector<IndicatorSet> sets;
        for (const auto& cname : term.columns) {
          sets.push_back(indicators_for(cname, categorical_column(data, cname, term.name),
                                        &info.warnings));
        }
        std::vector<std::size_t> idx(sets.size(), 0);
        while (true) {
          Eigen::VectorXd prod = sets[0].columns[idx[0]];
          std::string label = sets[0].labels[idx[0]];
          for (std::size_t s = 1; s < sets.size(); ++s) {
            prod = prod.cwiseProduct(sets[s].columns[idx[s]]);
            label += "*" + sets[s].labels[idx[s]];
          }
          cols.push_back(std::move(prod));
          info.term_of_column.push_back(static_cast<int>(t));
          info.column_names.push_back(label);

          std::size_t s = sets.size();
          while (s-- > 0) {
            if (++idx[s] < sets[s].columns.size()) break;
            idx[s] = 0;
            if (s == 0) goto crossed;
          }
        }
      crossed:
        break;
      }
    }
  }

  info.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    info.matrix.col(static_cast<Eigen::Index>(c)) = cols[c];
  }
  return info;
}

LeastSquaresFit fit_least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() == 0) {
    throw ValidationError("design matrix has zero rows");
  }
  if (X.rows() != y.size()) {
    throw ValidationError("design matrix and response length differ");
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(X);
  LeastSquaresFit fit;
  fit.coefficients = cod.solve(y);
  fit.rank = static_cast<int>(cod.rank());
  fit.residual_df = static_cast<int>(X.rows()) - fit.rank;
  fit.rss = (y - X * fit.coefficients).squaredNorm();
  return fit;
}

AnovaTable type1_decompose(const Eigen::MatrixXd& X, const std::vector<int>& term_of_column,
                           const std::vector<Term>& terms, const Eigen::VectorXd& y) {
  const Eigen::Index n = X.rows();
  if (n == 0) {
    throw ValidationError("design matrix has zero rows");
  }
  if (static_cast<std::size_t>(X.cols()) != term_of_column.size()) {
    throw ValidationError("term_of_column does not match the design matrix");
  }
  if (y.size() != n) {
    throw ValidationError("design matrix and response length differ");
  }

  // Column count of each prefix model: intercept block, then terms in order.
  std::vector<Eigen::Index> prefix_cols(terms.size() + 1, 0);
  int current = -1;
  for (std::size_t c = 0; c < term_of_column.size(); ++c) {
    const int t = term_of_column[c];
    if (t < current || t >= static_cast<int>(terms.size())) {
      throw ValidationError("term_of_column must be non-decreasing, intercept first");
    }
    current = t;
    for (std::size_t j = static_cast<std::size_t>(t + 1); j <= terms.size(); ++j) {
      prefix_cols[j] = static_cast<Eigen::Index>(c + 1);
    }
  }
  if (prefix_cols[0] == 0) {
    throw ValidationError("design matrix must start with an intercept block");
  }

  AnovaTable table;
  std::vector<PrefixFit> fits(terms.size() + 1);
  for (std::size_t j = 0; j < fits.size(); ++j) {
    fits[j] = fit_prefix(X, prefix_cols[j], y);
  }
  const PrefixFit& full = fits.back();

  const double total_ss = fits.front().rss;  // intercept-only residual
  const int error_df = static_cast<int>(n) - full.rank;
  const double error_ss = full.rss;
  const bool have_mse = error_df > 0 && error_ss > 0.0;
  const double mse = have_mse ? error_ss / error_df : 0.0;
  // Negative telescoping differences can only be roundoff; clamp against a
  // scale-relative floor.
  const double ss_floor = 1e-12 * std::max(total_ss, 1.0);

  for (std::size_t j = 0; j < terms.size(); ++j) {
    AnovaRow row;
    row.source = terms[j].name;
    row.display = terms[j].display.empty() ? terms[j].name : terms[j].display;
    row.df = fits[j + 1].rank - fits[j].rank;
    double ss = fits[j].rss - fits[j + 1].rss;
    if (ss < 0.0 && ss > -ss_floor) ss = 0.0;
    row.ss = ss;
    if (row.df > 0) {
      row.ms = ss / row.df;
      if (have_mse) {
        row.f = *row.ms / mse;
        row.p = f_pvalue(*row.f, row.df, error_df);
      }
    } else {
      row.ss = 0.0;
      table.warnings.push_back("term '" + terms[j].name +
                               "' is aliased with earlier terms (0 df)");
    }
    table.terms.push_back(std::move(row));
  }

  table.model.source = "model";
  table.model.display = "Model";
  table.model.df = full.rank - 1;
  table.model.ss = std::max(total_ss - error_ss, 0.0);
  if (table.model.df > 0) {
    table.model.ms = table.model.ss / table.model.df;
    if (have_mse) {
      table.model.f = *table.model.ms / mse;
      table.model.p = f_pvalue(*table.model.f, table.model.df, error_df);
    }
  }

  table.error.source = "error";
  table.error.display = "Error";
  table.error.df = error_df;
  table.error.ss = error_ss;
  if (error_df > 0) table.error.ms = error_ss / error_df;

  table.total.source = "corrected_total";
  table.total.display = "Corrected Total";
  table.total.df = static_cast<int>(n) - 1;
  table.total.ss = total_ss;

  return table;
}

AnovaTable type1_anova(const ModelSpec& spec, const DataTable& data) {
  if (!data.has(spec.response)) {
    throw ValidationError("response column '" + spec.response + "' not found");
  }
  const Column& resp = data.at(spec.response);
  if (resp.categorical) {
    throw ValidationError("response column '" + spec.response + "' must be numeric");
  }
  check_no_missing(spec.response, resp, "response");

  DesignInfo design = build_design_matrix(spec, data);
  const Eigen::Map<const Eigen::VectorXd> y(resp.values.data(),
                                            static_cast<Eigen::Index>(resp.values.size()));
  AnovaTable table = type1_decompose(design.matrix, design.term_of_column, spec.terms, y);
  table.response = spec.response;
  table.warnings.insert(table.warnings.begin(), design.warnings.begin(), design.warnings.end());
  return table;
}

AnovaTable type1_ancova(const ModelSpec& spec_with_covariates, const DataTable& data) {
  return type1_anova(spec_with_covariates, data);
}

std::string to_json(const AnovaTable& table) {
  ordered_json j;
  j["response"] = table.response;
  j["terms"] = ordered_json::array();
  for (const auto& row : table.terms) j["terms"].push_back(row_json(row));
  j["model"] = row_json(table.model);
  j["error"] = row_json(table.error);
  j["corrected_total"] = row_json(table.total);
  j["warnings"] = table.warnings;
  return j.dump(2) + "\n";
}

std::string to_text(const AnovaTable& table) {
  std::string out;
  append_text_block(out, "Sum of Squares", {&table.model, &table.error, &table.total});
  out += '\n';
  std::vector<const AnovaRow*> rows;
  for (const auto& row : table.terms) rows.push_back(&row);
  append_text_block(out, "Type I SS", rows);
  for (const auto& w : table.warnings) {
    out += "note: " + w + "\n";
  }
  return out;
}

}  // namespace loaddev::linmod
