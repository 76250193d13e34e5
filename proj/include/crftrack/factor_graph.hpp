#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <ostream>
#include <vector>

namespace crftrack {

/// Binary label. 0 = inactivate the tracklet, 1 = keep it active.
using Label = int;
inline constexpr Label kInactive = 0;
inline constexpr Label kActive = 1;

/// Energy (or probability) over the two labels of one variable.
using UnaryTable = std::array<double, 2>;
/// Energy (or probability) over a label pair, indexed `2 * y_first + y_second`.
using PairTable = std::array<double, 4>;

inline constexpr std::size_t pair_index(Label first, Label second) {
  return static_cast<std::size_t>(2 * first + second);
}

struct PairFactor {
  std::size_t first = 0;
  std::size_t second = 0;
  PairTable energy{};
};

/// Discrete factor graph over binary variables with one unary factor per
/// variable and any number of pairwise factors.
///
/// The distribution is p(y) proportional to exp(-sum of factor energies).
/// Factor ids: unary factor of variable v has id v; the k-th pair factor has
/// id num_vars() + k.
class FactorGraph {
 public:
  FactorGraph() = default;
  explicit FactorGraph(std::size_t num_vars);

  /// Appends a variable and returns its index. Dummy variables must carry an
  /// all-zero unary table.
  std::size_t add_variable(UnaryTable energy = {}, bool real = true);

  void set_unary(std::size_t var, UnaryTable energy);
  void set_real(std::size_t var, bool real);

  /// Adds a pair factor. If `a > b` the table is transposed so the stored
  /// factor always has first < second. Returns the pair index.
  std::size_t add_pair(std::size_t a, std::size_t b, PairTable energy);

  std::size_t num_vars() const { return unary_.size(); }
  std::size_t num_pairs() const { return pairs_.size(); }
  std::size_t num_factors() const { return unary_.size() + pairs_.size(); }

  const UnaryTable& unary(std::size_t var) const { return unary_.at(var); }
  const std::vector<UnaryTable>& unaries() const { return unary_; }
  const std::vector<PairFactor>& pairs() const { return pairs_; }
  bool is_real(std::size_t var) const { return real_.at(var); }
  const std::vector<bool>& real_mask() const { return real_; }

  /// Throws kValidation if a structural invariant is broken (bad indices,
  /// non-zero factor touching a dummy) or an energy is not finite.
  void validate() const;

 private:
  std::vector<UnaryTable> unary_;
  std::vector<PairFactor> pairs_;
  std::vector<bool> real_;
};

enum class BpSchedule { kFlooding };

struct BpConfig {
  std::size_t max_iterations = 50;
  double tolerance = 1e-6;  // max-abs change of any factor-to-variable message
  double damping = 0.5;     // weight on the previous message
  BpSchedule schedule = BpSchedule::kFlooding;

  void validate() const;
};

struct InferenceResult {
  std::vector<UnaryTable> node_marginals;
  std::vector<UnaryTable> unary_marginals;  // unary factor beliefs
  std::vector<PairTable> pair_marginals;    // parallel to graph.pairs()
  std::vector<Label> map_labels;
  std::optional<double> log_partition;      // exact mode only
  bool converged = true;
  std::size_t iterations_used = 0;
};

inline constexpr std::size_t kMaxExactVars = 20;

/// Brute-force enumeration of all 2^K labelings. MAP ties are broken toward
/// label 1, lower variable indices first.
InferenceResult exact_inference(const FactorGraph& graph);

/// Loopy sum-product with flooding schedule. When `trace` is non-null the
/// graph and every message of every sweep are written to it as text.
InferenceResult sum_product(const FactorGraph& graph, const BpConfig& config,
                            std::ostream* trace = nullptr);

/// Max-product variant; `map_labels` are per-variable max-belief decisions
/// with ties going to label 1. Marginal fields hold normalized max-beliefs.
InferenceResult max_product(const FactorGraph& graph, const BpConfig& config,
                            std::ostream* trace = nullptr);

/// Total energy of a full labeling.
double labeling_energy(const FactorGraph& graph, const std::vector<Label>& labels);

void write_graph(std::ostream& out, const FactorGraph& graph);

}  // namespace crftrack
