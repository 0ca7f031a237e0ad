#include "simrep/flux.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "simrep/errors.hpp"

namespace simrep {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-9;
constexpr double kFeasTol = 1e-7;
constexpr std::size_t kMaxIterations = 100000;

// Dense bounded-variable simplex over
//   max c'x  s.t.  A x = b (b >= 0),  0 <= x <= u,
// with one artificial column per row appended for phase 1.
class BoundedSimplex {
 public:
  BoundedSimplex(std::size_t rows, std::size_t cols, std::vector<double> a, std::vector<double> b,
                 std::vector<double> upper)
      : m_(rows), n_(cols), total_(cols + rows), a_(std::move(a)), b_(std::move(b)) {
    for (std::size_t i = 0; i < m_; ++i) {
      if (b_[i] < 0.0) {
        b_[i] = -b_[i];
        for (std::size_t j = 0; j < n_; ++j) a_[i * n_ + j] = -a_[i * n_ + j];
      }
    }
    upper_ = std::move(upper);
    upper_.resize(total_, kInf);
    tab_.assign(m_ * total_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      std::copy_n(a_.begin() + i * n_, n_, tab_.begin() + i * total_);
      tab_[i * total_ + n_ + i] = 1.0;
    }
    basis_.resize(m_);
    is_basic_.assign(total_, false);
    at_upper_.assign(total_, false);
    for (std::size_t i = 0; i < m_; ++i) {
      basis_[i] = n_ + i;
      is_basic_[n_ + i] = true;
    }
    values_ = b_;
  }

  LpStatus solve(const std::vector<double>& cost, std::vector<double>& x, std::size_t& iterations) {
    std::vector<double> phase1(total_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) phase1[n_ + i] = -1.0;
    if (run(phase1, /*allow_artificial=*/true, iterations) != LpStatus::kOptimal)
      return LpStatus::kInfeasible;
    double infeasibility = 0.0;
    for (std::size_t i = 0; i < m_; ++i)
      if (basis_[i] >= n_) infeasibility += std::max(0.0, values_[i]);
    double scale = 1.0;
    for (const double v : b_) scale = std::max(scale, std::abs(v));
    if (infeasibility > kFeasTol * scale) return LpStatus::kInfeasible;

    for (std::size_t i = 0; i < m_; ++i) upper_[n_ + i] = 0.0;
    std::vector<double> phase2(total_, 0.0);
    std::copy(cost.begin(), cost.end(), phase2.begin());
    const LpStatus status = run(phase2, /*allow_artificial=*/false, iterations);
    if (status != LpStatus::kOptimal) return status;
    polish();
    x.assign(n_, 0.0);
    for (std::size_t j = 0; j < n_; ++j)
      if (!is_basic_[j] && at_upper_[j]) x[j] = upper_[j];
    for (std::size_t i = 0; i < m_; ++i)
      if (basis_[i] < n_) x[basis_[i]] = values_[i];
    return LpStatus::kOptimal;
  }

 private:
  LpStatus run(const std::vector<double>& cost, bool allow_artificial, std::size_t& iterations) {
    std::vector<double> reduced(total_);
    for (std::size_t iter = 0; iter < kMaxIterations; ++iter, ++iterations) {
      // Bland: lowest-index improving column enters.
      std::size_t entering = total_;
      for (std::size_t j = 0; j < total_ && entering == total_; ++j) {
        if (is_basic_[j] || (!allow_artificial && j >= n_)) continue;
        double d = cost[j];
        for (std::size_t i = 0; i < m_; ++i) d -= cost[basis_[i]] * tab_[i * total_ + j];
        if ((!at_upper_[j] && d > kCostTol) || (at_upper_[j] && d < -kCostTol)) entering = j;
      }
      if (entering == total_) return LpStatus::kOptimal;

      const double direction = at_upper_[entering] ? -1.0 : 1.0;
      double step = upper_[entering];
      std::size_t leave_row = m_;  // m_ means the entering column just flips bounds
      std::size_t leave_index = entering;
      bool leave_to_upper = false;
      for (std::size_t i = 0; i < m_; ++i) {
        const double alpha = direction * tab_[i * total_ + entering];
        double limit;
        bool to_upper;
        if (alpha > kPivotTol) {
          limit = values_[i] / alpha;
          to_upper = false;
        } else if (alpha < -kPivotTol && std::isfinite(upper_[basis_[i]])) {
          limit = (upper_[basis_[i]] - values_[i]) / -alpha;
          to_upper = true;
        } else {
          continue;
        }
        limit = std::max(limit, 0.0);
        const bool better = limit < step - kPivotTol;
        const bool tie = !better && std::abs(limit - step) <= kPivotTol && basis_[i] < leave_index;
        if (better || tie) {
          step = limit;
          leave_row = i;
          leave_index = basis_[i];
          leave_to_upper = to_upper;
        }
      }
      if (!std::isfinite(step)) return LpStatus::kUnbounded;

      for (std::size_t i = 0; i < m_; ++i) values_[i] -= direction * step * tab_[i * total_ + entering];
      if (leave_row == m_) {
        at_upper_[entering] = !at_upper_[entering];
        continue;
      }
      const double entering_value = at_upper_[entering] ? upper_[entering] - step : step;
      pivot(leave_row, entering);
      const std::size_t leaving = basis_[leave_row];
      is_basic_[leaving] = false;
      at_upper_[leaving] = leave_to_upper;
      basis_[leave_row] = entering;
      is_basic_[entering] = true;
      at_upper_[entering] = false;
      values_[leave_row] = entering_value;
    }
    throw std::runtime_error("fba_solve: simplex iteration limit reached");
  }

  void pivot(std::size_t row, std::size_t col) {
    double* pivot_row = tab_.data() + row * total_;
    const double inv = 1.0 / pivot_row[col];
    for (std::size_t j = 0; j < total_; ++j) pivot_row[j] *= inv;
    pivot_row[col] = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == row) continue;
      double* r = tab_.data() + i * total_;
      const double factor = r[col];
      if (factor == 0.0) continue;
      for (std::size_t j = 0; j < total_; ++j) r[j] -= factor * pivot_row[j];
      r[col] = 0.0;
    }
  }

  // Recompute basic values from the original system so the result depends
  // only on the final basis, not on the pivot path.
  void polish() {
    Eigen::MatrixXd basis_matrix = Eigen::MatrixXd::Zero(m_, m_);
    Eigen::VectorXd rhs(m_);
    for (std::size_t i = 0; i < m_; ++i) rhs(i) = b_[i];
    auto column = [&](std::size_t j, std::size_t i) { return j < n_ ? a_[i * n_ + j] : (j - n_ == i ? 1.0 : 0.0); };
    for (std::size_t j = 0; j < total_; ++j) {
      if (is_basic_[j] || !at_upper_[j] || upper_[j] == 0.0) continue;
      for (std::size_t i = 0; i < m_; ++i) rhs(i) -= column(j, i) * upper_[j];
    }
    for (std::size_t k = 0; k < m_; ++k)
      for (std::size_t i = 0; i < m_; ++i) basis_matrix(i, k) = column(basis_[k], i);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(basis_matrix);
    if (!lu.isInvertible()) return;
    const Eigen::VectorXd solved = lu.solve(rhs);
    for (std::size_t k = 0; k < m_; ++k) values_[k] = solved(k);
  }

  std::size_t m_, n_, total_;
  std::vector<double> a_, b_, upper_;
  std::vector<double> tab_;
  std::vector<std::size_t> basis_;
  std::vector<bool> is_basic_, at_upper_;
  std::vector<double> values_;
};

double parse_bound(const nlohmann::json& value, const std::string& what) {
  if (value.is_number()) return value.get<double>();
  if (value.is_string()) {
    const auto s = value.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  throw InputError("flux network: bad bound for " + what);
}

nlohmann::json bound_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
  }
  return "unknown";
}

std::size_t FluxNetwork::reaction_index(const std::string& name) const {
  const auto it = std::find(reactions.begin(), reactions.end(), name);
  if (it == reactions.end()) throw InputError("flux network has no reaction '" + name + "'");
  return static_cast<std::size_t>(it - reactions.begin());
}

void FluxNetwork::validate() const {
  const std::size_t n = reactions.size();
  if (n == 0) throw InputError("flux network has no reactions");
  if (lower.size() != n || upper.size() != n || objective.size() != n || subsystems.size() != n)
    throw InputError("flux network: per-reaction arrays disagree in length");
  if (stoichiometry.size() != metabolites.size() * n)
    throw InputError("flux network: stoichiometry is not metabolites x reactions");
  bool has_objective = false;
  for (std::size_t j = 0; j < n; ++j) {
    if (std::isnan(lower[j]) || std::isnan(upper[j]) || !(lower[j] <= upper[j]))
      throw InputError("flux network: reaction '" + reactions[j] + "' has lower > upper");
    if (!std::isfinite(objective[j])) throw InputError("flux network: non-finite objective");
    has_objective = has_objective || objective[j] != 0.0;
  }
  for (const double v : stoichiometry)
    if (!std::isfinite(v)) throw InputError("flux network: non-finite stoichiometry");
  if (!has_objective) throw InputError("flux network: objective is all zero");
}

SimulationOutput FbaResult::output() const {
  SimulationOutput out;
  out.shape_tag = ShapeTag::kVector;
  out.dims = {flux.size()};
  out.data = flux;
  return out;
}

FbaResult fba_solve(const FluxNetwork& network) {
  network.validate();
  const std::size_t m = network.metabolite_count();
  const std::size_t n = network.reaction_count();

  struct Column {
    std::size_t reaction;
    double sign;
  };
  std::vector<Column> columns;
  std::vector<double> offset(n, 0.0);
  std::vector<double> upper;
  for (std::size_t j = 0; j < n; ++j) {
    const double lb = network.lower[j];
    const double ub = network.upper[j];
    if (std::isfinite(lb)) {
      columns.push_back({j, 1.0});
      offset[j] = lb;
      upper.push_back(ub - lb);
    } else if (std::isfinite(ub)) {
      columns.push_back({j, -1.0});
      offset[j] = ub;
      upper.push_back(kInf);
    } else {
      columns.push_back({j, 1.0});
      upper.push_back(kInf);
      columns.push_back({j, -1.0});
      upper.push_back(kInf);
    }
  }
  const std::size_t cols = columns.size();
  std::vector<double> a(m * cols);
  std::vector<double> b(m, 0.0);
  std::vector<double> cost(cols);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < cols; ++k) a[i * cols + k] = network.s(i, columns[k].reaction) * columns[k].sign;
    for (std::size_t j = 0; j < n; ++j) b[i] -= network.s(i, j) * offset[j];
  }
  for (std::size_t k = 0; k < cols; ++k) cost[k] = network.objective[columns[k].reaction] * columns[k].sign;

  FbaResult result;
  std::vector<double> x;
  BoundedSimplex simplex(m, cols, std::move(a), std::move(b), std::move(upper));
  result.status = simplex.solve(cost, x, result.iterations);
  if (!result.optimal()) return result;

  result.flux = offset;
  for (std::size_t k = 0; k < cols; ++k) result.flux[columns[k].reaction] += columns[k].sign * x[k];
  for (std::size_t j = 0; j < n; ++j) {
    double& v = result.flux[j];
    v = std::clamp(v, network.lower[j], network.upper[j]);
    if (std::abs(v) < 1e-12) v = 0.0;
    result.objective += network.objective[j] * v;
  }
  return result;
}

FbaResult fba_knockout(const FluxNetwork& network, std::size_t reaction) {
  if (reaction >= network.reaction_count())
    throw InputError("fba_knockout: reaction index " + std::to_string(reaction) + " out of range");
  FluxNetwork copy = network;
  copy.lower[reaction] = 0.0;
  copy.upper[reaction] = 0.0;
  return fba_solve(copy);
}

FluxNetwork parse_flux_network(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("flux network: invalid JSON: ") + e.what());
  }
  try {
    FluxNetwork net;
    net.metabolites = doc.at("metabolites").get<std::vector<std::string>>();
    std::map<std::string, std::size_t> metabolite_index;
    for (std::size_t i = 0; i < net.metabolites.size(); ++i) metabolite_index[net.metabolites[i]] = i;
    const auto& reactions = doc.at("reactions");
    const std::size_t n = reactions.size();
    net.stoichiometry.assign(net.metabolites.size() * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const auto& r = reactions[j];
      const auto id = r.at("id").get<std::string>();
      net.reactions.push_back(id);
      net.subsystems.push_back(r.value("subsystem", std::string("unassigned")));
      net.lower.push_back(parse_bound(r.at("lower"), id));
      net.upper.push_back(parse_bound(r.at("upper"), id));
      net.objective.push_back(r.value("objective", 0.0));
      for (const auto& [met, coeff] : r.at("stoichiometry").items()) {
        const auto it = metabolite_index.find(met);
        if (it == metabolite_index.end())
          throw InputError("flux network: reaction '" + id + "' uses unknown metabolite '" + met + "'");
        net.stoichiometry[it->second * n + j] = coeff.get<double>();
      }
    }
    net.validate();
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("flux network: ") + e.what());
  }
}

FluxNetwork load_flux_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open flux network file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_flux_network(buffer.str());
}

std::string flux_network_to_json(const FluxNetwork& network) {
  nlohmann::json doc;
  doc["metabolites"] = network.metabolites;
  doc["reactions"] = nlohmann::json::array();
  for (std::size_t j = 0; j < network.reaction_count(); ++j) {
    nlohmann::json stoich = nlohmann::json::object();
    for (std::size_t i = 0; i < network.metabolite_count(); ++i)
      if (network.s(i, j) != 0.0) stoich[network.metabolites[i]] = network.s(i, j);
    doc["reactions"].push_back({{"id", network.reactions[j]},
                                {"subsystem", network.subsystems[j]},
                                {"lower", bound_json(network.lower[j])},
                                {"upper", bound_json(network.upper[j])},
                                {"objective", network.objective[j]},
                                {"stoichiometry", stoich}});
  }
  return doc.dump(2);
}

}  // namespace simrep
