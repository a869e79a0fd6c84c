#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "explab/core.hpp"

namespace explab {

/// Gaussian kernel scaled so k(x, x) = 1:
///   exp(-1/2 * sum_j (x_j - y_j)^2 / sigma_j^2)
double kernel(std::span<const double> x, std::span<const double> y, std::span<const double> sigma);

/// Rule-of-thumb bandwidth for one state dimension given the state
/// dimensionality d and the number of observations n (n < 1 treated as 1):
///   0.3 * (4 / (2 + d))^(1/(4+d)) * n^(-1/(4+d))
double rule_of_thumb_bandwidth(int d, double n);

/// Per-dimension bandwidths for concatenated [state, action] vectors: the
/// rule of thumb on state dimensions and 1 on action dimensions.
std::vector<double> bandwidth(int state_dims, int action_dims, double n);

/// Exploration bonus N^(-1/2) clipped to [0, 1]; 1 whenever N <= 1.
double exploration_bonus(double count);

/// Maps (state, action) into [0, 1]^d using the declared bounds. Discrete
/// actions map their index onto [0, 1].
class Normalizer {
 public:
  Normalizer(Box state_bounds, ActionSpace actions);

  std::size_t state_dims() const { return state_.dims(); }
  std::size_t action_dims() const { return actions_.dims(); }
  std::size_t dims() const { return state_dims() + action_dims(); }

  /// Throws std::invalid_argument on dimension mismatch.
  std::vector<double> normalize(const State& s, const Action& a) const;
  void normalize_state(const State& s, std::span<double> out) const;
  void normalize_action(const Action& a, std::span<double> out) const;

 private:
  Box state_;
  ActionSpace actions_;
};

/// Weighted observation table behind the kernel pseudo-count.
///
/// Total mass (sum of weights) always equals the number of insert() calls.
/// Near-duplicates (kernel > dedup_threshold against one or more stored
/// entries) are merged by splitting one unit of mass evenly over all of
/// them. When the table is full a uniformly chosen entry is evicted and its
/// weight spread evenly over the survivors.
class CountTable {
 public:
  struct Options {
    int state_dims = 1;
    int action_dims = 0;
    std::size_t max_size = 32768;
    double dedup_threshold = 0.95;
    /// Empty: recompute the rule-of-thumb bandwidth from the insertion count
    /// on every insert. Otherwise a fixed per-dimension bandwidth.
    std::vector<double> fixed_sigma;
    std::uint64_t seed = 0;  // eviction stream
  };

  enum class InsertKind { appended, merged, evicted_and_appended };

  struct InsertOutcome {
    InsertKind kind = InsertKind::appended;
    std::vector<std::size_t> merged_into;  // indices before the insert
    std::size_t evicted_index = 0;         // index before the insert
    double evicted_weight = 0.0;
  };

  explicit CountTable(Options options);

  int dims() const { return opts_.state_dims + opts_.action_dims; }
  std::size_t size() const { return size_; }
  std::uint64_t insertions() const { return insertions_; }
  const Options& options() const { return opts_; }

  /// Bandwidth currently in effect.
  std::span<const double> sigma() const { return sigma_; }

  /// Weighted kernel sum over the table with compensated summation.
  double pseudo_count(std::span<const double> x) const;
  double pseudo_count(std::span<const double> x, std::span<const double> sigma) const;

  /// Counts for queries that share their first prefix.size() coordinates
  /// and differ in the remaining ones (one column of `suffixes` each).
  void pseudo_counts(std::span<const double> prefix, const Eigen::MatrixXd& suffixes,
                     std::span<double> out) const;

  InsertOutcome insert(std::span<const double> x);

  double total_mass() const;
  std::vector<double> point(std::size_t i) const;
  double weight(std::size_t i) const { return weights_[i]; }

  void save(std::ostream& out) const;
  static CountTable load(std::istream& in);

 private:
  void refresh_sigma();
  void kernel_row(std::span<const double> x, std::span<const double> sigma,
                  Eigen::ArrayXd& out) const;

  Options opts_;
  Eigen::MatrixXd points_;  // capacity x dims, one row per entry
  std::vector<double> weights_;
  std::size_t size_ = 0;
  std::uint64_t insertions_ = 0;
  std::vector<double> sigma_;
  Rng rng_;
};

/// Exact integer visit counts per (state index, action index).
class TabularCounts {
 public:
  TabularCounts(std::int64_t num_states, int num_actions);

  std::uint64_t count(std::int64_t state, int action) const;
  void increment(std::int64_t state, int action);
  std::uint64_t total() const { return total_; }

 private:
  std::int64_t num_states_;
  int num_actions_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

/// The count source an agent consults: N(s, a) and the visit update.
class VisitCounter {
 public:
  virtual ~VisitCounter() = default;
  virtual double count(const State& s, const Action& a) const = 0;
  virtual void add(const State& s, const Action& a) = 0;
  /// N(s, a_i) for many actions at one state.
  virtual void count_many(const State& s, std::span<const Action> actions,
                          std::span<double> out) const;
  virtual std::unique_ptr<VisitCounter> clone() const = 0;

  double bonus(const State& s, const Action& a) const { return exploration_bonus(count(s, a)); }
};

class TabularCounter final : public VisitCounter {
 public:
  /// env must be finite (state_index defined) with discrete actions.
  explicit TabularCounter(const Environment& env);

  double count(const State& s, const Action& a) const override;
  void add(const State& s, const Action& a) override;
  std::unique_ptr<VisitCounter> clone() const override;
  const TabularCounts& table() const { return table_; }

 private:
  std::shared_ptr<const Environment> env_;
  TabularCounts table_;
};

class KernelCounter final : public VisitCounter {
 public:
  KernelCounter(const EnvSpec& spec, CountTable::Options options);

  double count(const State& s, const Action& a) const override;
  void add(const State& s, const Action& a) override;
  void count_many(const State& s, std::span<const Action> actions,
                  std::span<double> out) const override;
  std::unique_ptr<VisitCounter> clone() const override;
  const CountTable& table() const { return table_; }

 private:
  Normalizer norm_;
  CountTable table_;
};

}  // namespace explab
