// Copyright 2026 petsig authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Fixed and random-parameter ordered logit estimation by simulated maximum
// likelihood.
//
// Random coefficients are independent normals: beta_ki = beta_k + sigma_k
// omega_ik, with omega drawn once per (group, draw) from scrambled Halton
// points pushed through the inverse normal CDF.  The same R draws serve
// every group, fixed by the seed.  Identification fixes the first threshold
// at zero and keeps a free constant; the remaining thresholds are positive
// increments, so monotonicity holds at every iterate.
//
// Everything downstream of the seed is deterministic: groups are evaluated
// in a fixed order, per-group results land in indexed slots, and cross-group
// reductions use a pairwise tree, so fits are bit-reproducible regardless of
// thread count.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "petsig/csv.hpp"
#include "petsig/errors.hpp"
#include "petsig/halton.hpp"
#include "petsig/mathutil.hpp"
#include "petsig/ordered_logit.hpp"
#include "petsig/parallel.hpp"
#include "petsig/util.hpp"

namespace petsig {

// ---------------------------------------------------------------------------
// Model specification

struct ModelSpec {
  std::string response;
  std::vector<std::string> fixed;
  std::vector<std::string> random;
  bool include_constant = true;
  int draws = 500;
  std::uint64_t seed = 1;
  std::string group_key = "pair_id";
};

inline void validate_model_spec(const ModelSpec& spec) {
  if (spec.response.empty()) {
    throw ConfigError("model: response column is required");
  }
  if (spec.group_key.empty()) {
    throw ConfigError("model: group_key column is required");
  }
  if (spec.draws < 1) {
    throw ConfigError("model: draws must be at least 1");
  }
  std::set<std::string> seen;
  for (const auto& list : {spec.fixed, spec.random}) {
    for (const auto& name : list) {
      if (name.empty()) {
        throw ConfigError("model: empty covariate name");
      }
      if (name == spec.response) {
        throw ConfigError("model: response cannot be a covariate");
      }
      if (!seen.insert(name).second) {
        throw ConfigError("model: covariate listed twice: " + name);
      }
    }
  }
}

inline nlohmann::json model_spec_to_json(const ModelSpec& spec) {
  return nlohmann::json{{"response", spec.response},
                        {"fixed", spec.fixed},
                        {"random", spec.random},
                        {"constant", spec.include_constant},
                        {"draws", spec.draws},
                        {"seed", spec.seed},
                        {"group_key", spec.group_key}};
}

inline ModelSpec model_spec_from_json(const nlohmann::json& j) {
  ModelSpec spec;
  try {
    spec.response = j.at("response").get<std::string>();
    if (j.contains("fixed")) {
      spec.fixed = j.at("fixed").get<std::vector<std::string>>();
    }
    if (j.contains("random")) {
      spec.random = j.at("random").get<std::vector<std::string>>();
    }
    if (j.contains("constant")) {
      spec.include_constant = j.at("constant").get<bool>();
    }
    if (j.contains("draws")) {
      spec.draws = j.at("draws").get<int>();
    }
    if (j.contains("seed")) {
      spec.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("group_key")) {
      spec.group_key = j.at("group_key").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model file: ") + e.what());
  }
  validate_model_spec(spec);
  return spec;
}

inline ModelSpec parse_model_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return model_spec_from_json(j);
}

// ---------------------------------------------------------------------------
// Tabular input

/// Raw comma-separated table: a header and string cells.  The fit path reads
/// feature datasets this way so a model file can name any column.
struct DataTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

inline DataTable read_data_table(const std::filesystem::path& path) {
  CsvReader reader(path.string());
  DataTable table;
  table.columns = reader.header();
  std::vector<std::string_view> fields;
  while (reader.next(fields)) {
    if (fields.size() != table.columns.size()) {
      throw DataError(path.string() + ": row at line " +
                      std::to_string(reader.line_number()) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(table.columns.size()));
    }
    std::vector<std::string> row;
    row.reserve(fields.size());
    for (const auto f : fields) {
      row.emplace_back(f);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline void write_data_table(const std::filesystem::path& path,
                             const DataTable& table,
                             const std::vector<std::string>& comments = {}) {
  CsvWriter writer(path.string());
  for (const auto& c : comments) {
    writer.comment(c);
  }
  writer.row(table.columns);
  for (const auto& row : table.rows) {
    writer.row(row);
  }
  writer.close();
}

/// Estimation-ready view of a table: covariates in spec order (fixed then
/// random), levels 1..J, and rows grouped by the panel key in first
/// appearance order.
struct ModelData {
  std::vector<std::string> covariates;
  std::size_t n_fixed = 0;
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  std::vector<std::string> group_labels;
  std::vector<std::vector<std::size_t>> rows_of_group;
  int levels = 0;
};

inline ModelData build_model_data(const DataTable& table,
                                  const ModelSpec& spec) {
  validate_model_spec(spec);
  if (table.rows.empty()) {
    throw DataError("model data: table has no rows");
  }
  auto column_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
      if (table.columns[i] == name) {
        return i;
      }
    }
    throw DataError("model data: missing column " + name);
  };

  ModelData data;
  data.covariates = spec.fixed;
  data.covariates.insert(data.covariates.end(), spec.random.begin(),
                         spec.random.end());
  data.n_fixed = spec.fixed.size();

  const std::size_t y_col = column_index(spec.response);
  const std::size_t g_col = column_index(spec.group_key);
  std::vector<std::size_t> x_cols;
  for (const auto& name : data.covariates) {
    x_cols.push_back(column_index(name));
  }

  std::map<std::string, std::size_t> group_index;
  std::set<int> observed;
  for (const auto& row : table.rows) {
    long long level = 0;
    if (!parse_int(row[y_col], level) || level < 1) {
      throw DataError("model data: bad " + spec.response + " value '" +
                      row[y_col] + "'");
    }
    std::vector<double> covs(x_cols.size());
    for (std::size_t k = 0; k < x_cols.size(); ++k) {
      if (!parse_double(row[x_cols[k]], covs[k])) {
        throw DataError("model data: bad " + data.covariates[k] + " value '" +
                        row[x_cols[k]] + "'");
      }
    }
    const std::string& label = row[g_col];
    auto [it, fresh] = group_index.emplace(label, data.group_labels.size());
    if (fresh) {
      data.group_labels.push_back(label);
      data.rows_of_group.emplace_back();
    }
    data.rows_of_group[it->second].push_back(data.y.size());
    data.y.push_back(static_cast<int>(level));
    data.x.push_back(std::move(covs));
    observed.insert(static_cast<int>(level));
    data.levels = std::max(data.levels, static_cast<int>(level));
  }
  if (observed.size() < 2) {
    throw DataError("model data: response needs at least two observed levels");
  }
  return data;
}

// ---------------------------------------------------------------------------
// Parameters

/// Natural-scale parameters.  cutpoints holds the full threshold list with
/// the fixed leading zero; sigma entries are standard deviations.
struct OrderedParams {
  double constant = 0.0;
  std::vector<double> beta;
  std::vector<double> sigma;
  std::vector<double> cutpoints;
};

/// Shape of the unconstrained optimizer vector: [constant][slopes][sigma
/// pre-softplus][log threshold increments].
struct ParamLayout {
  bool constant = true;
  std::size_t covariates = 0;
  std::size_t randoms = 0;
  std::size_t levels = 0;

  std::size_t size() const {
    return (constant ? 1 : 0) + covariates + randoms + (levels - 2);
  }
};

inline ParamLayout layout_for(const ModelData& data, const ModelSpec& spec) {
  ParamLayout layout;
  layout.constant = spec.include_constant;
  layout.covariates = data.covariates.size();
  layout.randoms = spec.random.size();
  layout.levels = static_cast<std::size_t>(data.levels);
  return layout;
}

inline OrderedParams unpack_params(const Eigen::VectorXd& theta,
                                   const ParamLayout& layout) {
  if (static_cast<std::size_t>(theta.size()) != layout.size()) {
    throw std::invalid_argument("unpack_params: length mismatch");
  }
  OrderedParams p;
  std::size_t at = 0;
  p.constant = layout.constant ? theta[at++] : 0.0;
  p.beta.resize(layout.covariates);
  for (auto& b : p.beta) b = theta[at++];
  p.sigma.resize(layout.randoms);
  for (auto& s : p.sigma) s = softplus(theta[at++]);
  p.cutpoints.assign(1, 0.0);
  for (std::size_t m = 0; m + 2 < layout.levels; ++m) {
    p.cutpoints.push_back(p.cutpoints.back() + std::exp(theta[at++]));
  }
  return p;
}

inline Eigen::VectorXd pack_params(const OrderedParams& p,
                                   const ParamLayout& layout) {
  if (p.beta.size() != layout.covariates ||
      p.sigma.size() != layout.randoms ||
      p.cutpoints.size() + 1 != layout.levels) {
    throw std::invalid_argument("pack_params: shape mismatch");
  }
  if (p.cutpoints.empty() || p.cutpoints.front() != 0.0) {
    throw std::invalid_argument("pack_params: first threshold must be 0");
  }
  Eigen::VectorXd theta(layout.size());
  std::size_t at = 0;
  if (layout.constant) theta[at++] = p.constant;
  for (const double b : p.beta) theta[at++] = b;
  for (const double s : p.sigma) {
    if (!(s > 0.0)) {
      throw std::invalid_argument("pack_params: sigma must be positive");
    }
    theta[at++] = inv_softplus(s);
  }
  for (std::size_t m = 1; m < p.cutpoints.size(); ++m) {
    const double gap = p.cutpoints[m] - p.cutpoints[m - 1];
    if (!(gap > 0.0)) {
      throw std::invalid_argument("pack_params: thresholds must increase");
    }
    theta[at++] = std::log(gap);
  }
  return theta;
}

// ---------------------------------------------------------------------------
// Likelihood

/// Standard-normal draw matrix (n rows by dim columns) from the scrambled
/// Halton sequence.
inline std::vector<std::vector<double>> normal_draws(std::size_t dim,
                                                     std::size_t n,
                                                     std::uint64_t seed) {
  auto points = halton_sequence(dim, n, seed);
  for (auto& row : points) {
    for (auto& v : row) {
      v = inv_normal_cdf(v);
    }
  }
  return points;
}

namespace detail {

// Transformed-space gradient layout: [constant][beta][sigma][all
// thresholds].  The fixed first threshold is dropped when chaining to the
// optimizer vector.
struct LoglikEval {
  double loglik = 0.0;
  std::vector<double> grad;
  std::size_t floored = 0;
};

inline LoglikEval loglik_engine(const ModelData& data,
                                const OrderedParams& params,
                                const std::vector<std::vector<double>>& omega,
                                int threads, double prob_floor,
                                bool want_grad) {
  const std::size_t n_cov = data.covariates.size();
  const std::size_t n_sig = params.sigma.size();
  if (params.beta.size() != n_cov) {
    throw std::invalid_argument("loglik: beta width mismatch");
  }
  if (n_sig > n_cov) {
    throw std::invalid_argument("loglik: more sigmas than covariates");
  }
  const std::size_t rows_random = data.n_fixed;
  if (n_sig > 0 && rows_random + n_sig != n_cov) {
    throw std::invalid_argument("loglik: random block width mismatch");
  }
  const std::size_t draws = omega.empty() ? 1 : omega.size();
  if (!omega.empty()) {
    for (const auto& row : omega) {
      if (row.size() != n_sig) {
        throw std::invalid_argument("loglik: draw width mismatch");
      }
    }
  }
  const double log_floor = prob_floor > 0.0
                               ? std::log(prob_floor)
                               : -std::numeric_limits<double>::infinity();
  const std::size_t n_cut = params.cutpoints.size();
  const std::size_t width = 1 + n_cov + n_sig + n_cut;
  const std::size_t n_groups = data.rows_of_group.size();

  std::vector<double> group_loglik(n_groups);
  std::vector<double> group_grad(want_grad ? n_groups * width : 0, 0.0);
  std::vector<std::size_t> group_floored(n_groups, 0);

  auto eval_group = [&](std::size_t g) {
    const auto& members = data.rows_of_group[g];
    std::vector<double> score(draws, 0.0);
    std::vector<double> dgrad(want_grad ? draws * width : 0, 0.0);
    std::size_t clamped = 0;

    for (std::size_t r = 0; r < draws; ++r) {
      const double* draw = omega.empty() ? nullptr : omega[r].data();
      double total = 0.0;
      double* gr = want_grad ? dgrad.data() + r * width : nullptr;
      for (const std::size_t t : members) {
        const std::vector<double>& row = data.x[t];
        double eta = params.constant;
        for (std::size_t k = 0; k < n_cov; ++k) {
          eta += params.beta[k] * row[k];
        }
        if (draw != nullptr) {
          for (std::size_t s = 0; s < n_sig; ++s) {
            eta += params.sigma[s] * draw[s] * row[rows_random + s];
          }
        }
        const ObsGrad og =
            ordered_log_prob_grad(eta, params.cutpoints, data.y[t]);
        if (og.logp < log_floor) {
          total += log_floor;
          ++clamped;
          continue;
        }
        total += og.logp;
        if (gr != nullptr) {
          gr[0] += og.deta;
          for (std::size_t k = 0; k < n_cov; ++k) {
            gr[1 + k] += og.deta * row[k];
          }
          if (draw != nullptr) {
            for (std::size_t s = 0; s < n_sig; ++s) {
              gr[1 + n_cov + s] += og.deta * draw[s] * row[rows_random + s];
            }
          }
          const std::size_t j = static_cast<std::size_t>(data.y[t]);
          if (j > 1) gr[1 + n_cov + n_sig + j - 2] += og.dlo;
          if (j < n_cut + 1) gr[1 + n_cov + n_sig + j - 1] += og.dhi;
        }
      }
      score[r] = total;
    }

    // log of the draw average; when every draw agrees this reduces to the
    // common value exactly, which is what makes sigma = 0 collapse onto the
    // fixed-parameter likelihood bit for bit.
    double peak = score[0];
    for (const double s : score) peak = std::fmax(peak, s);
    double mass = 0.0;
    for (const double s : score) mass += std::exp(s - peak);
    group_loglik[g] =
        peak + (std::log(mass) - std::log(static_cast<double>(draws)));
    group_floored[g] = clamped;

    if (want_grad) {
      double* out = group_grad.data() + g * width;
      for (std::size_t r = 0; r < draws; ++r) {
        const double w = std::exp(score[r] - peak) / mass;
        const double* gr = dgrad.data() + r * width;
        for (std::size_t p = 0; p < width; ++p) {
          out[p] += w * gr[p];
        }
      }
    }
  };
  parallel_for(n_groups, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t g = begin; g < end; ++g) {
      eval_group(g);
    }
  });

  LoglikEval out;
  out.loglik = pairwise_sum(group_loglik.data(), n_groups);
  for (const std::size_t c : group_floored) out.floored += c;
  if (want_grad) {
    out.grad.assign(width, 0.0);
    std::vector<double> column(n_groups);
    for (std::size_t p = 0; p < width; ++p) {
      for (std::size_t g = 0; g < n_groups; ++g) {
        column[g] = group_grad[g * width + p];
      }
      out.grad[p] = pairwise_sum(column.data(), n_groups);
    }
  }
  return out;
}

}  // namespace detail

/// Log-likelihood ignoring the random block (sigma treated as zero).
inline double loglik_fixed(const ModelData& data, const OrderedParams& params,
                           int threads = 1, double prob_floor = 1e-300,
                           std::size_t* floored = nullptr) {
  const auto eval =
      detail::loglik_engine(data, params, {}, threads, prob_floor, false);
  if (floored != nullptr) *floored = eval.floored;
  return eval.loglik;
}

/// Simulated log-likelihood over the supplied draw matrix.  The floored
/// count tallies (row, draw) clamp events.
inline double loglik_simulated(const ModelData& data,
                               const OrderedParams& params,
                               const std::vector<std::vector<double>>& omega,
                               int threads = 1, double prob_floor = 1e-300,
                               std::size_t* floored = nullptr) {
  const auto eval =
      detail::loglik_engine(data, params, omega, threads, prob_floor, false);
  if (floored != nullptr) *floored = eval.floored;
  return eval.loglik;
}

// ---------------------------------------------------------------------------
// Optimizer

struct OptimOptions {
  int max_iterations = 500;
  double grad_tol = 1e-5;
  double rel_tol = 1e-9;
  double armijo_c1 = 1e-4;
  double shrink = 0.5;
  double min_step = 1e-13;
};

struct OptimReport {
  Eigen::VectorXd x;
  Eigen::VectorXd grad;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  double grad_norm = std::numeric_limits<double>::infinity();
};

/// Dense BFGS with Armijo backtracking.  eval(x, grad_or_null) returns the
/// objective; the gradient is only requested at accepted points.
template <typename Eval>
OptimReport bfgs_minimize(Eval&& eval, Eigen::VectorXd x0,
                          const OptimOptions& opt = {}) {
  const Eigen::Index n = x0.size();
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd grad(n);
  double value = eval(x0, &grad);

  OptimReport report;
  report.x = x0;
  report.grad = grad;
  report.value = value;
  report.grad_norm = grad.lpNorm<Eigen::Infinity>();

  for (int it = 1; it <= opt.max_iterations; ++it) {
    if (report.grad_norm < opt.grad_tol) {
      report.converged = true;
      break;
    }
    Eigen::VectorXd direction = -(h_inv * grad);
    double slope = grad.dot(direction);
    if (!(slope < 0.0)) {
      h_inv.setIdentity();
      direction = -grad;
      slope = grad.dot(direction);
    }

    double step = 1.0;
    Eigen::VectorXd trial;
    double trial_value = value;
    bool accepted = false;
    while (step >= opt.min_step) {
      trial = report.x + step * direction;
      trial_value = eval(trial, nullptr);
      if (std::isfinite(trial_value) &&
          trial_value <= value + opt.armijo_c1 * step * slope) {
        accepted = true;
        break;
      }
      step *= opt.shrink;
    }
    if (!accepted) {
      break;
    }

    Eigen::VectorXd new_grad(n);
    const double new_value = eval(trial, &new_grad);
    const Eigen::VectorXd s = trial - report.x;
    const Eigen::VectorXd y = new_grad - grad;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd outer =
          Eigen::MatrixXd::Identity(n, n) - rho * s * y.transpose();
      h_inv = outer * h_inv * outer.transpose() + rho * s * s.transpose();
    }

    const double drop = std::fabs(value - new_value);
    report.x = trial;
    report.grad = new_grad;
    report.value = new_value;
    report.grad_norm = new_grad.lpNorm<Eigen::Infinity>();
    report.iterations = it;
    grad = new_grad;
    value = new_value;
    if (report.grad_norm < opt.grad_tol ||
        drop <= opt.rel_tol * (1.0 + std::fabs(new_value))) {
      report.converged = true;
      break;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Fitting

struct FitRow {
  std::string name;
  double estimate = 0.0;
  bool odds_applicable = false;
  double odds_ratio = std::numeric_limits<double>::quiet_NaN();
  double std_error = std::numeric_limits<double>::quiet_NaN();
  double z_value = std::numeric_limits<double>::quiet_NaN();
  double p_value = std::numeric_limits<double>::quiet_NaN();
};

struct FitConvergence {
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
};

struct FitResult {
  std::vector<FitRow> rows;
  OrderedParams params;
  double log_likelihood = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  std::size_t n_observations = 0;
  std::size_t n_groups = 0;
  int n_parameters = 0;
  int levels = 0;
  int draws = 0;
  std::uint64_t seed = 0;
  std::string response;
  std::string group_key;
  FitConvergence convergence;
  bool se_available = false;
  std::size_t floored_rows = 0;
};

inline double odds_ratio(double estimate) { return std::exp(estimate); }

inline std::pair<double, double> information_criteria(double loglik,
                                                      std::size_t k,
                                                      std::size_t n) {
  const double aic = 2.0 * static_cast<double>(k) - 2.0 * loglik;
  const double bic =
      static_cast<double>(k) * std::log(static_cast<double>(n)) -
      2.0 * loglik;
  return {aic, bic};
}

/// Deterministic starting point: slopes zero, sigma 0.1, thresholds read
/// off the observed cumulative level shares through the logit map.
inline OrderedParams initial_params(const ModelData& data,
                                    const ModelSpec& spec) {
  const std::size_t levels = static_cast<std::size_t>(data.levels);
  std::vector<double> counts(levels, 0.0);
  for (const int y : data.y) counts[static_cast<std::size_t>(y) - 1] += 1.0;
  const double n = static_cast<double>(data.y.size());

  auto logit_of_cum = [&](std::size_t through) {
    double c = 0.0;
    for (std::size_t j = 0; j <= through; ++j) c += counts[j];
    c /= n;
    c = std::clamp(c, 0.5 / n, 1.0 - 0.5 / n);
    return std::log(c / (1.0 - c));
  };

  OrderedParams p;
  const double base = logit_of_cum(0);
  p.constant = spec.include_constant ? -base : 0.0;
  p.beta.assign(data.covariates.size(), 0.0);
  p.sigma.assign(spec.random.size(), 0.1);
  p.cutpoints.assign(1, 0.0);
  double prev_target = 0.0;
  for (std::size_t m = 1; m + 1 < levels; ++m) {
    const double target = logit_of_cum(m) - base;
    const double gap = std::fmax(target - prev_target, 1e-3);
    p.cutpoints.push_back(p.cutpoints.back() + gap);
    prev_target = target;
  }
  return p;
}

namespace detail {

// Maps the natural-scale gradient onto the optimizer vector.
inline Eigen::VectorXd chain_to_raw(const std::vector<double>& tg,
                                    const Eigen::VectorXd& theta,
                                    const ParamLayout& layout) {
  const std::size_t n_cov = layout.covariates;
  const std::size_t n_sig = layout.randoms;
  const std::size_t n_cut = layout.levels - 1;
  Eigen::VectorXd raw(layout.size());
  std::size_t at = 0;
  std::size_t raw_at = 0;
  if (layout.constant) {
    raw[raw_at++] = tg[0];
  }
  at = 1;
  for (std::size_t k = 0; k < n_cov; ++k) {
    raw[raw_at++] = tg[at + k];
  }
  at += n_cov;
  const std::size_t sigma_base = (layout.constant ? 1 : 0) + n_cov;
  for (std::size_t s = 0; s < n_sig; ++s) {
    raw[raw_at++] = tg[at + s] * logistic_cdf(theta[sigma_base + s]);
  }
  at += n_sig;
  // Threshold m = sum of the first m increments, so each increment collects
  // the gradients of every threshold after it.
  const std::size_t incr_base = sigma_base + n_sig;
  double suffix = 0.0;
  std::vector<double> incr(layout.levels - 2, 0.0);
  for (std::size_t m = n_cut; m-- > 1;) {
    suffix += tg[at + m];
    incr[m - 1] = suffix * std::exp(theta[incr_base + m - 1]);
  }
  for (const double v : incr) raw[raw_at++] = v;
  return raw;
}

inline std::string significance_stars(double p) {
  if (!(p == p)) return "";
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  if (p < 0.1) return ".";
  return "";
}

}  // namespace detail

/// Maximizes the (simulated) likelihood and assembles the report.  Bitwise
/// reproducible for a given data, spec, and seed, at any thread count.
inline FitResult fit(const ModelData& data, const ModelSpec& spec,
                     int threads = 1) {
  validate_model_spec(spec);
  if (data.covariates.size() != spec.fixed.size() + spec.random.size()) {
    throw std::invalid_argument("fit: data and spec covariates differ");
  }
  if (data.levels < 2) {
    throw DataError("fit: response needs at least two levels");
  }
  const ParamLayout layout = layout_for(data, spec);
  const std::size_t n_random = spec.random.size();
  const std::vector<std::vector<double>> omega =
      n_random > 0 ? normal_draws(n_random,
                                  static_cast<std::size_t>(spec.draws),
                                  spec.seed)
                   : std::vector<std::vector<double>>{};

  std::size_t floored_total = 0;
  auto eval = [&](const Eigen::VectorXd& theta,
                  Eigen::VectorXd* grad) -> double {
    const OrderedParams p = unpack_params(theta, layout);
    const auto at = detail::loglik_engine(data, p, omega, threads, 1e-300,
                                          grad != nullptr);
    if (grad != nullptr) {
      *grad = -detail::chain_to_raw(at.grad, theta, layout);
      floored_total = at.floored;
    }
    return -at.loglik;
  };

  const Eigen::VectorXd start = pack_params(initial_params(data, spec), layout);
  const OptimReport opt = bfgs_minimize(eval, start);

  FitResult result;
  result.params = unpack_params(opt.x, layout);
  result.log_likelihood = -opt.value;
  result.n_observations = data.y.size();
  result.n_groups = data.rows_of_group.size();
  result.n_parameters = static_cast<int>(layout.size());
  result.levels = data.levels;
  result.draws = n_random > 0 ? spec.draws : 0;
  result.seed = spec.seed;
  result.response = spec.response;
  result.group_key = spec.group_key;
  result.convergence = {opt.converged, opt.iterations, opt.grad_norm};
  result.floored_rows = floored_total;
  const auto [aic, bic] = information_criteria(
      result.log_likelihood, layout.size(), result.n_observations);
  result.aic = aic;
  result.bic = bic;

  // Observed information from a central difference of the gradient.
  const std::size_t dim = layout.size();
  Eigen::MatrixXd hessian(dim, dim);
  bool hessian_ok = true;
  {
    Eigen::VectorXd gp(dim);
    Eigen::VectorXd gm(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      const double h = std::fmax(1e-4, 1e-4 * std::fabs(opt.x[i]));
      Eigen::VectorXd probe = opt.x;
      probe[i] = opt.x[i] + h;
      eval(probe, &gp);
      probe[i] = opt.x[i] - h;
      eval(probe, &gm);
      hessian.col(i) = (gp - gm) / (2.0 * h);
    }
    hessian = 0.5 * (hessian + hessian.transpose()).eval();
    if (!hessian.allFinite()) {
      hessian_ok = false;
    }
  }

  Eigen::MatrixXd covariance;
  if (hessian_ok) {
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    if (ldlt.info() == Eigen::Success) {
      covariance = ldlt.solve(Eigen::MatrixXd::Identity(dim, dim));
      const double residual =
          (hessian * covariance - Eigen::MatrixXd::Identity(dim, dim))
              .cwiseAbs()
              .maxCoeff();
      if (!covariance.allFinite() || residual > 1e-4) {
        hessian_ok = false;
      }
    } else {
      hessian_ok = false;
    }
  }
  result.se_available = hessian_ok;

  // Reported rows carry natural-scale estimates; their standard errors come
  // through the delta method on the raw covariance.
  struct Reported {
    std::string name;
    double estimate;
    bool odds;
    Eigen::VectorXd jacobian;
  };
  std::vector<Reported> reported;
  const std::size_t beta_base = layout.constant ? 1 : 0;
  const std::size_t sigma_base = beta_base + layout.covariates;
  const std::size_t incr_base = sigma_base + layout.randoms;
  auto unit = [&](std::size_t i) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
    v[i] = 1.0;
    return v;
  };
  if (layout.constant) {
    reported.push_back(
        {"constant", result.params.constant, false, unit(0)});
  }
  for (std::size_t k = 0; k < data.n_fixed; ++k) {
    reported.push_back({data.covariates[k], result.params.beta[k], true,
                        unit(beta_base + k)});
  }
  for (std::size_t s = 0; s < layout.randoms; ++s) {
    const std::size_t k = data.n_fixed + s;
    reported.push_back({"mean. " + data.covariates[k], result.params.beta[k],
                        true, unit(beta_base + k)});
    Eigen::VectorXd j = Eigen::VectorXd::Zero(dim);
    j[sigma_base + s] = logistic_cdf(opt.x[sigma_base + s]);
    reported.push_back(
        {"std. dev " + data.covariates[k], result.params.sigma[s], true, j});
  }
  for (std::size_t m = 1; m < result.params.cutpoints.size(); ++m) {
    Eigen::VectorXd j = Eigen::VectorXd::Zero(dim);
    for (std::size_t u = 0; u < m; ++u) {
      j[incr_base + u] = std::exp(opt.x[incr_base + u]);
    }
    reported.push_back({"kappa." + std::to_string(m),
                        result.params.cutpoints[m], false, j});
  }

  for (const auto& rep : reported) {
    FitRow row;
    row.name = rep.name;
    row.estimate = rep.estimate;
    row.odds_applicable = rep.odds;
    if (rep.odds) {
      row.odds_ratio = odds_ratio(rep.estimate);
    }
    if (hessian_ok) {
      const double var = rep.jacobian.dot(covariance * rep.jacobian);
      if (var > 0.0 && std::isfinite(var)) {
        row.std_error = std::sqrt(var);
        row.z_value = rep.estimate / row.std_error;
        row.p_value = two_sided_p(row.z_value);
      } else {
        result.se_available = false;
      }
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

/// Convenience: read a table, bind the spec, and fit.
inline FitResult fit(const DataTable& table, const ModelSpec& spec,
                     int threads = 1) {
  return fit(build_model_data(table, spec), spec, threads);
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::json fit_result_to_json(const FitResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : result.rows) {
    nlohmann::json r{{"name", row.name},
                     {"estimate", row.estimate},
                     {"std_error", row.std_error},
                     {"z_value", row.z_value},
                     {"p_value", row.p_value}};
    if (row.odds_applicable) {
      r["odds_ratio"] = row.odds_ratio;
    }
    rows.push_back(std::move(r));
  }
  return nlohmann::json{
      {"coefficients", rows},
      {"log_likelihood", result.log_likelihood},
      {"aic", result.aic},
      {"bic", result.bic},
      {"n_observations", result.n_observations},
      {"n_groups", result.n_groups},
      {"n_parameters", result.n_parameters},
      {"levels", result.levels},
      {"draws", result.draws},
      {"seed", result.seed},
      {"response", result.response},
      {"group_key", result.group_key},
      {"floored_rows", result.floored_rows},
      {"se_available", result.se_available},
      {"convergence",
       {{"converged", result.convergence.converged},
        {"iterations", result.convergence.iterations},
        {"gradient_norm", result.convergence.gradient_norm}}}};
}

/// Aligned coefficient table in the usual layout: a goodness-of-fit line,
/// a header, then one row per parameter with significance stars.
inline std::string fit_result_table(const FitResult& result) {
  auto num = [](double v, int width) {
    char buf[64];
    if (v != v) {
      std::snprintf(buf, sizeof(buf), "%*s", width, "n/a");
    } else {
      std::snprintf(buf, sizeof(buf), "%*.3f", width, v);
    }
    return std::string(buf);
  };
  auto dash = [](int width) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%*s", width, "-");
    return std::string(buf);
  };

  std::size_t name_width = std::string("Coefficients:").size();
  for (const auto& row : result.rows) {
    name_width = std::max(name_width, row.name.size());
  }

  std::string out;
  {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "No. of Obs = %zu, Log Likelihood = %.1f, AIC = %.1f, "
                  "BIC = %.1f\n",
                  result.n_observations, result.log_likelihood, result.aic,
                  result.bic);
    out += buf;
  }
  auto pad = [&](const std::string& s) {
    std::string p = s;
    p.resize(name_width, ' ');
    return p;
  };
  out += pad("Coefficients:") + "  Estimate  Odds ratio  Std. error"
         "  z-value  Pr(> z)\n";
  for (const auto& row : result.rows) {
    out += pad(row.name);
    out += num(row.estimate, 10);
    out += row.odds_applicable ? num(row.odds_ratio, 12) : dash(12);
    out += num(row.std_error, 12);
    out += num(row.z_value, 9);
    out += num(row.p_value, 9);
    const std::string stars = detail::significance_stars(row.p_value);
    if (!stars.empty()) {
      out += "  " + stars;
    }
    out += "\n";
  }
  {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "Groups = %zu, Parameters = %d, Levels = %d, Draws = %d, "
                  "Seed = %llu\n",
                  result.n_groups, result.n_parameters, result.levels,
                  result.draws,
                  static_cast<unsigned long long>(result.seed));
    out += buf;
    std::snprintf(buf, sizeof(buf),
                  "Converged = %s after %d iterations, gradient norm %.3g\n",
                  result.convergence.converged ? "yes" : "no",
                  result.convergence.iterations,
                  result.convergence.gradient_norm);
    out += buf;
  }
  return out;
}

}  // namespace petsig
