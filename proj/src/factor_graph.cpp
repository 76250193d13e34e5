#include "crftrack/factor_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>

#include "crftrack/error.hpp"

namespace crftrack {

namespace {

bool all_zero(const auto& table) {
  return std::all_of(table.begin(), table.end(), [](double e) { return e == 0.0; });
}

bool all_finite(const auto& table) {
  return std::all_of(table.begin(), table.end(), [](double e) { return std::isfinite(e); });
}

std::string factor_name(const FactorGraph& graph, std::size_t pair) {
  const PairFactor& f = graph.pairs()[pair];
  std::ostringstream os;
  os << "factor " << graph.num_vars() + pair << " (pair " << f.first << "," << f.second << ")";
  return os.str();
}

void normalize(UnaryTable& m) {
  const double s = m[0] + m[1];
  m[0] /= s;
  m[1] /= s;
}

// Shifts log-weights so they describe a distribution (log-sum-exp = 0).
void log_normalize(UnaryTable& m) {
  const double hi = std::max(m[0], m[1]);
  const double lse = hi + std::log(std::exp(m[0] - hi) + std::exp(m[1] - hi));
  m[0] -= lse;
  m[1] -= lse;
}

UnaryTable to_probability(const UnaryTable& log_m) {
  UnaryTable p{std::exp(log_m[0]), std::exp(log_m[1])};
  normalize(p);
  return p;
}

bool finite_pair(const UnaryTable& m) { return std::isfinite(m[0]) && std::isfinite(m[1]); }

struct Endpoint {
  std::size_t pair;
  int side;  // 0: variable is pair.first, 1: variable is pair.second
};

enum class Semiring { kSum, kMax };

// Messages live in the log domain so that energy gaps of hundreds of nats
// survive. Damping blends old and new messages geometrically, and the
// convergence test uses the change of the log-messages, which bounds the
// change of the normalized messages from above.
class MessagePassing {
 public:
  MessagePassing(const FactorGraph& graph, const BpConfig& config, Semiring semiring,
                 std::ostream* trace)
      : graph_(graph), config_(config), semiring_(semiring), trace_(trace) {
    const std::size_t n = graph.num_vars();
    const std::size_t p = graph.num_pairs();
    adjacency_.resize(n);
    for (std::size_t k = 0; k < p; ++k) {
      adjacency_[graph.pairs()[k].first].push_back({k, 0});
      adjacency_[graph.pairs()[k].second].push_back({k, 1});
    }
    unary_log_.reserve(n);
    for (const auto& e : graph.unaries()) {
      UnaryTable m{-e[0], -e[1]};
      log_normalize(m);
      unary_log_.push_back(m);
    }
    pair_log_.reserve(p);
    for (const auto& f : graph.pairs()) {
      PairTable m{};
      for (std::size_t k = 0; k < 4; ++k) m[k] = -f.energy[k];
      pair_log_.push_back(m);
    }
    const UnaryTable uniform{-std::log(2.0), -std::log(2.0)};
    f2v_.assign(p, {uniform, uniform});
    v2f_.assign(p, {uniform, uniform});
  }

  InferenceResult run() {
    InferenceResult result;
    result.converged = false;
    if (trace_ != nullptr) write_graph(*trace_, graph_);

    for (std::size_t it = 1; it <= config_.max_iterations; ++it) {
      update_variable_messages();
      const double delta = update_factor_messages();
      result.iterations_used = it;
      if (trace_ != nullptr) dump(it);
      if (delta < config_.tolerance) {
        result.converged = true;
        break;
      }
    }
    update_variable_messages();
    collect(result);
    return result;
  }

 private:
  // Log of the unary potential times all incoming factor messages except the
  // one from `skip`.
  UnaryTable incoming(std::size_t var, const Endpoint* skip) const {
    UnaryTable m = unary_log_[var];
    for (const Endpoint& e : adjacency_[var]) {
      if (skip != nullptr && e.pair == skip->pair) continue;
      m[0] += f2v_[e.pair][e.side][0];
      m[1] += f2v_[e.pair][e.side][1];
    }
    return m;
  }

  void update_variable_messages() {
    for (std::size_t v = 0; v < adjacency_.size(); ++v) {
      for (const Endpoint& e : adjacency_[v]) {
        UnaryTable m = incoming(v, &e);
        if (!finite_pair(m)) {
          fail(ErrorKind::kNumerical, "non-finite message from variable " + std::to_string(v) +
                                          " to " + factor_name(graph_, e.pair));
        }
        log_normalize(m);
        v2f_[e.pair][e.side] = m;
      }
    }
  }

  double combine(double a, double b) const {
    const double hi = std::max(a, b);
    if (semiring_ == Semiring::kMax) return hi;
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
  }

  double update_factor_messages() {
    double delta = 0.0;
    const double d = config_.damping;
    for (std::size_t k = 0; k < pair_log_.size(); ++k) {
      const PairTable& pot = pair_log_[k];
      const UnaryTable& from_first = v2f_[k][0];
      const UnaryTable& from_second = v2f_[k][1];
      std::array<UnaryTable, 2> fresh{};
      for (Label y = 0; y < 2; ++y) {
        fresh[0][y] = combine(pot[pair_index(y, 0)] + from_second[0],
                              pot[pair_index(y, 1)] + from_second[1]);
        fresh[1][y] = combine(pot[pair_index(0, y)] + from_first[0],
                              pot[pair_index(1, y)] + from_first[1]);
      }
      for (int side = 0; side < 2; ++side) {
        UnaryTable& m = fresh[side];
        if (!finite_pair(m)) {
          fail(ErrorKind::kNumerical, "non-finite message from " + factor_name(graph_, k));
        }
        log_normalize(m);
        UnaryTable& old = f2v_[k][side];
        for (Label y = 0; y < 2; ++y) m[y] = (1.0 - d) * m[y] + d * old[y];
        log_normalize(m);
        for (Label y = 0; y < 2; ++y) delta = std::max(delta, std::abs(m[y] - old[y]));
        old = m;
      }
    }
    return delta;
  }

  void collect(InferenceResult& result) const {
    const std::size_t n = graph_.num_vars();
    result.node_marginals.resize(n);
    result.map_labels.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
      UnaryTable b = incoming(v, nullptr);
      result.map_labels[v] = b[1] >= b[0] ? kActive : kInactive;
      log_normalize(b);
      result.node_marginals[v] = to_probability(b);
    }
    result.unary_marginals = result.node_marginals;
    result.pair_marginals.resize(pair_log_.size());
    for (std::size_t k = 0; k < pair_log_.size(); ++k) {
      PairTable b{};
      for (Label a = 0; a < 2; ++a) {
        for (Label c = 0; c < 2; ++c) {
          const std::size_t idx = pair_index(a, c);
          b[idx] = pair_log_[k][idx] + v2f_[k][0][a] + v2f_[k][1][c];
        }
      }
      if (!std::all_of(b.begin(), b.end(), [](double x) { return std::isfinite(x); })) {
        fail(ErrorKind::kNumerical, "non-finite belief at " + factor_name(graph_, k));
      }
      const double hi = *std::max_element(b.begin(), b.end());
      double s = 0.0;
      for (double& x : b) {
        x = std::exp(x - hi);
        s += x;
      }
      for (double& x : b) x /= s;
      result.pair_marginals[k] = b;
    }
  }

  void dump(std::size_t it) const {
    std::ostream& os = *trace_;
    os << "iteration " << it << '\n';
    const std::size_t n = graph_.num_vars();
    auto line = [&os](std::size_t factor, std::size_t var, const char* dir, const UnaryTable& m) {
      const UnaryTable p = to_probability(m);
      os << factor << ' ' << var << ' ' << dir << ' ' << p[0] << ' ' << p[1] << '\n';
    };
    for (std::size_t v = 0; v < n; ++v) line(v, v, "f2v", unary_log_[v]);
    for (std::size_t k = 0; k < pair_log_.size(); ++k) {
      const PairFactor& f = graph_.pairs()[k];
      const std::size_t vars[2] = {f.first, f.second};
      for (int side = 0; side < 2; ++side) {
        line(n + k, vars[side], "v2f", v2f_[k][side]);
        line(n + k, vars[side], "f2v", f2v_[k][side]);
      }
    }
  }

  const FactorGraph& graph_;
  const BpConfig& config_;
  Semiring semiring_;
  std::ostream* trace_;
  std::vector<std::vector<Endpoint>> adjacency_;
  std::vector<UnaryTable> unary_log_;
  std::vector<PairTable> pair_log_;
  std::vector<std::array<UnaryTable, 2>> f2v_;
  std::vector<std::array<UnaryTable, 2>> v2f_;
};

InferenceResult run_bp(const FactorGraph& graph, const BpConfig& config, Semiring semiring,
                       std::ostream* trace) {
  graph.validate();
  config.validate();
  return MessagePassing(graph, config, semiring, trace).run();
}

}  // namespace

FactorGraph::FactorGraph(std::size_t num_vars)
    : unary_(num_vars, UnaryTable{}), real_(num_vars, true) {}

std::size_t FactorGraph::add_variable(UnaryTable energy, bool real) {
  unary_.push_back(energy);
  real_.push_back(real);
  return unary_.size() - 1;
}

void FactorGraph::set_unary(std::size_t var, UnaryTable energy) { unary_.at(var) = energy; }

void FactorGraph::set_real(std::size_t var, bool real) { real_.at(var) = real; }

std::size_t FactorGraph::add_pair(std::size_t a, std::size_t b, PairTable energy) {
  if (a > b) {
    std::swap(a, b);
    std::swap(energy[pair_index(0, 1)], energy[pair_index(1, 0)]);
  }
  pairs_.push_back({a, b, energy});
  return pairs_.size() - 1;
}

void FactorGraph::validate() const {
  for (std::size_t v = 0; v < unary_.size(); ++v) {
    if (!all_finite(unary_[v])) {
      fail(ErrorKind::kValidation, "non-finite unary energy at variable " + std::to_string(v));
    }
    if (!real_[v] && !all_zero(unary_[v])) {
      fail(ErrorKind::kValidation, "dummy variable " + std::to_string(v) + " has a non-zero unary table");
    }
  }
  for (std::size_t k = 0; k < pairs_.size(); ++k) {
    const PairFactor& f = pairs_[k];
    if (f.first >= f.second || f.second >= unary_.size()) {
      fail(ErrorKind::kValidation, "invalid variable indices on " + factor_name(*this, k));
    }
    if (!all_finite(f.energy)) {
      fail(ErrorKind::kValidation, "non-finite energy on " + factor_name(*this, k));
    }
    if ((!real_[f.first] || !real_[f.second]) && !all_zero(f.energy)) {
      fail(ErrorKind::kValidation, factor_name(*this, k) + " touches a dummy but is non-zero");
    }
  }
}

void BpConfig::validate() const {
  if (max_iterations < 1) fail(ErrorKind::kValidation, "max_iterations must be >= 1");
  if (!(tolerance > 0.0)) fail(ErrorKind::kValidation, "tolerance must be > 0");
  if (!(damping >= 0.0 && damping < 1.0)) fail(ErrorKind::kValidation, "damping must lie in [0,1)");
}

InferenceResult exact_inference(const FactorGraph& graph) {
  graph.validate();
  const std::size_t n = graph.num_vars();
  if (n > kMaxExactVars) {
    fail(ErrorKind::kCapacity, "exact inference supports at most " + std::to_string(kMaxExactVars) +
                                   " variables, got " + std::to_string(n));
  }
  // Variable v is bit (n - 1 - v) of the mask, so descending masks visit
  // labelings with label 1 on low indices first.
  const std::uint64_t count = std::uint64_t{1} << n;
  auto label_of = [n](std::uint64_t mask, std::size_t v) -> Label {
    return static_cast<Label>((mask >> (n - 1 - v)) & 1U);
  };

  std::vector<double> energy(count);
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    double e = 0.0;
    for (std::size_t v = 0; v < n; ++v) e += graph.unary(v)[label_of(mask, v)];
    for (const PairFactor& f : graph.pairs()) {
      e += f.energy[pair_index(label_of(mask, f.first), label_of(mask, f.second))];
    }
    energy[mask] = e;
  }

  InferenceResult result;
  std::uint64_t best = count - 1;
  for (std::uint64_t m = count; m-- > 0;) {
    if (energy[m] < energy[best]) best = m;
  }
  const double lo = energy[best];

  result.node_marginals.assign(n, UnaryTable{});
  result.pair_marginals.assign(graph.num_pairs(), PairTable{});
  double z = 0.0;
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    const double w = std::exp(-(energy[mask] - lo));
    z += w;
    for (std::size_t v = 0; v < n; ++v) result.node_marginals[v][label_of(mask, v)] += w;
    for (std::size_t k = 0; k < graph.num_pairs(); ++k) {
      const PairFactor& f = graph.pairs()[k];
      result.pair_marginals[k][pair_index(label_of(mask, f.first), label_of(mask, f.second))] += w;
    }
  }
  for (auto& m : result.node_marginals) {
    m[0] /= z;
    m[1] /= z;
  }
  for (auto& m : result.pair_marginals) {
    for (double& x : m) x /= z;
  }
  result.unary_marginals = result.node_marginals;
  result.map_labels.resize(n);
  for (std::size_t v = 0; v < n; ++v) result.map_labels[v] = label_of(best, v);
  result.log_partition = -lo + std::log(z);
  result.converged = true;
  result.iterations_used = 0;
  return result;
}

InferenceResult sum_product(const FactorGraph& graph, const BpConfig& config, std::ostream* trace) {
  return run_bp(graph, config, Semiring::kSum, trace);
}

InferenceResult max_product(const FactorGraph& graph, const BpConfig& config, std::ostream* trace) {
  return run_bp(graph, config, Semiring::kMax, trace);
}

double labeling_energy(const FactorGraph& graph, const std::vector<Label>& labels) {
  if (labels.size() != graph.num_vars()) {
    fail(ErrorKind::kValidation, "labeling size does not match the number of variables");
  }
  double e = 0.0;
  for (std::size_t v = 0; v < labels.size(); ++v) e += graph.unary(v)[labels[v]];
  for (const PairFactor& f : graph.pairs()) {
    e += f.energy[pair_index(labels[f.first], labels[f.second])];
  }
  return e;
}

void write_graph(std::ostream& out, const FactorGraph& graph) {
  out << "graph " << graph.num_vars() << ' ' << graph.num_pairs() << '\n';
  for (std::size_t v = 0; v < graph.num_vars(); ++v) {
    out << "var " << v << ' ' << (graph.is_real(v) ? "real" : "dummy") << ' '
        << graph.unary(v)[0] << ' ' << graph.unary(v)[1] << '\n';
  }
  for (std::size_t k = 0; k < graph.num_pairs(); ++k) {
    const PairFactor& f = graph.pairs()[k];
    out << "pair " << graph.num_vars() + k << ' ' << f.first << ' ' << f.second;
    for (double e : f.energy) out << ' ' << e;
    out << '\n';
  }
}

}  // namespace crftrack
