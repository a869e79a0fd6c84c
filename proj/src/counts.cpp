#include "explab/counts.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace explab {

namespace {

/// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      c_ += (sum_ - t) + v;
    } else {
      c_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + c_; }

 private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

double weighted_sum(const Eigen::ArrayXd& k, const std::vector<double>& w) {
  CompensatedSum acc;
  for (Eigen::Index i = 0; i < k.size(); ++i) acc.add(w[std::size_t(i)] * k(i));
  return acc.value();
}

void write_double(std::ostream& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, res.ptr - buf);
}

double read_double(std::istream& in) {
  std::string token;
  if (!(in >> token)) throw std::runtime_error("truncated count table snapshot");
  double v = 0.0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
    throw std::runtime_error("bad number in count table snapshot: " + token);
  }
  return v;
}

constexpr std::string_view kMagic = "explab-counts";
constexpr int kFormatVersion = 1;

}  // namespace

double kernel(std::span<const double> x, std::span<const double> y, std::span<const double> sigma) {
  if (x.size() != y.size() || x.size() != sigma.size()) {
    throw std::invalid_argument("kernel arguments must share a dimension");
  }
  double q = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double z = (x[j] - y[j]) / sigma[j];
    q += z * z;
  }
  return std::exp(-0.5 * q);
}

double rule_of_thumb_bandwidth(int d, double n) {
  if (d < 1) throw std::invalid_argument("bandwidth needs d >= 1");
  const double dd = d;
  return 0.3 * std::pow(4.0 / (2.0 + dd), 1.0 / (4.0 + dd)) *
         std::pow(std::max(n, 1.0), -1.0 / (4.0 + dd));
}

std::vector<double> bandwidth(int state_dims, int action_dims, double n) {
  std::vector<double> sigma(std::size_t(state_dims + action_dims), 1.0);
  const double s = rule_of_thumb_bandwidth(state_dims, n);
  std::fill_n(sigma.begin(), state_dims, s);
  return sigma;
}

double exploration_bonus(double count) {
  if (!(count > 1.0)) return 1.0;
  return 1.0 / std::sqrt(count);
}

// ----------------------------------------------------------------- normalizer

Normalizer::Normalizer(Box state_bounds, ActionSpace actions)
    : state_(std::move(state_bounds)), actions_(std::move(actions)) {
  for (std::size_t j = 0; j < state_.dims(); ++j) {
    if (!(state_.high[j] > state_.low[j])) throw std::invalid_argument("state bounds need max > min");
  }
  if (!actions_.is_discrete()) {
    for (std::size_t j = 0; j < actions_.bounds.dims(); ++j) {
      if (!(actions_.bounds.high[j] > actions_.bounds.low[j])) {
        throw std::invalid_argument("action bounds need max > min");
      }
    }
  }
}

void Normalizer::normalize_state(const State& s, std::span<double> out) const {
  if (s.size() != state_.dims()) throw std::invalid_argument("state dimension mismatch");
  for (std::size_t j = 0; j < s.size(); ++j) {
    out[j] = (s[j] - state_.low[j]) / (state_.high[j] - state_.low[j]);
  }
}

void Normalizer::normalize_action(const Action& a, std::span<double> out) const {
  if (actions_.is_discrete()) {
    if (!a.is_discrete()) throw std::invalid_argument("expected a discrete action");
    out[0] = actions_.num_discrete > 1 ? double(a.index) / double(actions_.num_discrete - 1) : 0.0;
    return;
  }
  if (a.values.size() != actions_.bounds.dims()) throw std::invalid_argument("action dimension mismatch");
  for (std::size_t j = 0; j < a.values.size(); ++j) {
    out[j] = (a.values[j] - actions_.bounds.low[j]) / (actions_.bounds.high[j] - actions_.bounds.low[j]);
  }
}

std::vector<double> Normalizer::normalize(const State& s, const Action& a) const {
  std::vector<double> x(dims());
  normalize_state(s, std::span(x).first(state_dims()));
  normalize_action(a, std::span(x).subspan(state_dims()));
  return x;
}

// ---------------------------------------------------------------- count table

CountTable::CountTable(Options options) : opts_(std::move(options)), rng_(opts_.seed) {
  if (opts_.state_dims < 1 || opts_.action_dims < 0) throw std::invalid_argument("bad count table dims");
  if (opts_.max_size < 2) throw std::invalid_argument("count table max_size must be >= 2");
  if (!opts_.fixed_sigma.empty()) {
    if (int(opts_.fixed_sigma.size()) != dims()) throw std::invalid_argument("fixed sigma dimension mismatch");
    for (double s : opts_.fixed_sigma) {
      if (!(s > 0.0)) throw std::invalid_argument("bandwidths must be positive");
    }
  }
  points_.resize(Eigen::Index(std::min<std::size_t>(opts_.max_size, 256)), dims());
  refresh_sigma();
}

void CountTable::refresh_sigma() {
  sigma_ = opts_.fixed_sigma.empty()
               ? bandwidth(opts_.state_dims, opts_.action_dims, double(insertions_))
               : opts_.fixed_sigma;
}

void CountTable::kernel_row(std::span<const double> x, std::span<const double> sigma,
                            Eigen::ArrayXd& out) const {
  if (int(x.size()) != dims() || int(sigma.size()) != dims()) {
    throw std::invalid_argument("count query dimension mismatch");
  }
  const Eigen::Index n = Eigen::Index(size_);
  Eigen::ArrayXd d2 = Eigen::ArrayXd::Zero(n);
  for (int j = 0; j < dims(); ++j) {
    d2 += ((points_.col(j).head(n).array() - x[std::size_t(j)]) * (1.0 / sigma[std::size_t(j)])).square();
  }
  out = (-0.5 * d2).exp();
}

double CountTable::pseudo_count(std::span<const double> x) const { return pseudo_count(x, sigma_); }

double CountTable::pseudo_count(std::span<const double> x, std::span<const double> sigma) const {
  Eigen::ArrayXd k;
  kernel_row(x, sigma, k);
  return weighted_sum(k, weights_);
}

void CountTable::pseudo_counts(std::span<const double> prefix, const Eigen::MatrixXd& suffixes,
                               std::span<double> out) const {
  const int p = int(prefix.size());
  if (p + suffixes.rows() != dims() || Eigen::Index(out.size()) != suffixes.cols()) {
    throw std::invalid_argument("count query dimension mismatch");
  }
  const Eigen::Index n = Eigen::Index(size_);
  Eigen::ArrayXd base = Eigen::ArrayXd::Zero(n);
  for (int j = 0; j < p; ++j) {
    base += ((points_.col(j).head(n).array() - prefix[std::size_t(j)]) * (1.0 / sigma_[std::size_t(j)])).square();
  }
  Eigen::ArrayXd d2(n);
  for (Eigen::Index q = 0; q < suffixes.cols(); ++q) {
    d2 = base;
    for (Eigen::Index j = 0; j < suffixes.rows(); ++j) {
      const Eigen::Index dim = p + j;
      d2 += ((points_.col(dim).head(n).array() - suffixes(j, q)) * (1.0 / sigma_[std::size_t(dim)])).square();
    }
    out[std::size_t(q)] = weighted_sum((-0.5 * d2).exp(), weights_);
  }
}

CountTable::InsertOutcome CountTable::insert(std::span<const double> x) {
  InsertOutcome outcome;
  if (size_ > 0) {
    Eigen::ArrayXd k;
    kernel_row(x, sigma_, k);
    for (std::size_t i = 0; i < size_; ++i) {
      if (k(Eigen::Index(i)) > opts_.dedup_threshold) outcome.merged_into.push_back(i);
    }
  } else if (int(x.size()) != dims()) {
    throw std::invalid_argument("count insert dimension mismatch");
  }

  if (!outcome.merged_into.empty()) {
    outcome.kind = InsertKind::merged;
    const double share = 1.0 / double(outcome.merged_into.size());
    for (std::size_t i : outcome.merged_into) weights_[i] += share;
  } else {
    if (size_ == opts_.max_size) {
      outcome.kind = InsertKind::evicted_and_appended;
      const std::size_t e = std::size_t(rng_.uniform_index(size_));
      outcome.evicted_index = e;
      outcome.evicted_weight = weights_[e];
      const std::size_t last = size_ - 1;
      if (e != last) {
        points_.row(Eigen::Index(e)) = points_.row(Eigen::Index(last));
        weights_[e] = weights_[last];
      }
      weights_.pop_back();
      --size_;
      const double share = outcome.evicted_weight / double(size_);
      for (double& w : weights_) w += share;
    }
    if (Eigen::Index(size_) == points_.rows()) {
      const auto grown = std::min<std::size_t>(opts_.max_size, std::max<std::size_t>(2 * size_, 16));
      points_.conservativeResize(Eigen::Index(grown), Eigen::NoChange);
    }
    for (int j = 0; j < dims(); ++j) points_(Eigen::Index(size_), j) = x[std::size_t(j)];
    weights_.push_back(1.0);
    ++size_;
  }
  ++insertions_;
  refresh_sigma();
  return outcome;
}

double CountTable::total_mass() const {
  CompensatedSum acc;
  for (double w : weights_) acc.add(w);
  return acc.value();
}

std::vector<double> CountTable::point(std::size_t i) const {
  std::vector<double> x(static_cast<std::size_t>(dims()));
  for (int j = 0; j < dims(); ++j) x[std::size_t(j)] = points_(Eigen::Index(i), j);
  return x;
}

void CountTable::save(std::ostream& out) const {
  out << kMagic << ' ' << kFormatVersion << '\n'
      << "dims " << opts_.state_dims << ' ' << opts_.action_dims << '\n'
      << "max_size " << opts_.max_size << '\n'
      << "dedup ";
  write_double(out, opts_.dedup_threshold);
  out << "\ninsertions " << insertions_ << '\n' << "fixed_sigma " << opts_.fixed_sigma.size();
  for (double s : opts_.fixed_sigma) {
    out << ' ';
    write_double(out, s);
  }
  out << "\nrng " << rng_.serialize() << '\n' << "entries " << size_ << '\n';
  for (std::size_t i = 0; i < size_; ++i) {
    write_double(out, weights_[i]);
    for (int j = 0; j < dims(); ++j) {
      out << ' ';
      write_double(out, points_(Eigen::Index(i), j));
    }
    out << '\n';
  }
}

CountTable CountTable::load(std::istream& in) {
  std::string magic, key;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic) throw std::runtime_error("not a count table snapshot");
  if (version != kFormatVersion) throw std::runtime_error("unsupported count table snapshot version");
  Options opts;
  if (!(in >> key >> opts.state_dims >> opts.action_dims) || key != "dims") {
    throw std::runtime_error("malformed count table snapshot");
  }
  if (!(in >> key >> opts.max_size) || key != "max_size") throw std::runtime_error("malformed count table snapshot");
  if (!(in >> key) || key != "dedup") throw std::runtime_error("malformed count table snapshot");
  opts.dedup_threshold = read_double(in);
  std::uint64_t insertions = 0;
  std::size_t nsigma = 0;
  if (!(in >> key >> insertions) || key != "insertions") throw std::runtime_error("malformed count table snapshot");
  if (!(in >> key >> nsigma) || key != "fixed_sigma") throw std::runtime_error("malformed count table snapshot");
  for (std::size_t i = 0; i < nsigma; ++i) opts.fixed_sigma.push_back(read_double(in));
  if (!(in >> key) || key != "rng") throw std::runtime_error("malformed count table snapshot");
  std::string rng_text;
  std::getline(in, rng_text);
  CountTable table(opts);
  table.rng_ = Rng::deserialize(rng_text);
  std::size_t entries = 0;
  if (!(in >> key >> entries) || key != "entries" || entries > opts.max_size) {
    throw std::runtime_error("malformed count table snapshot");
  }
  table.points_.resize(Eigen::Index(std::max<std::size_t>(entries, 16)), table.dims());
  for (std::size_t i = 0; i < entries; ++i) {
    table.weights_.push_back(read_double(in));
    for (int j = 0; j < table.dims(); ++j) table.points_(Eigen::Index(i), j) = read_double(in);
  }
  table.size_ = entries;
  table.insertions_ = insertions;
  table.refresh_sigma();
  return table;
}

// ------------------------------------------------------------- tabular counts

TabularCounts::TabularCounts(std::int64_t num_states, int num_actions)
    : num_states_(num_states), num_actions_(num_actions) {
  if (num_states < 1 || num_actions < 1) throw std::invalid_argument("tabular counts need a finite space");
  counts_.assign(std::size_t(num_states * num_actions), 0);
}

std::uint64_t TabularCounts::count(std::int64_t state, int action) const {
  if (state < 0 || state >= num_states_ || action < 0 || action >= num_actions_) {
    throw std::out_of_range("tabular count index out of range");
  }
  return counts_[std::size_t(state * num_actions_ + action)];
}

void TabularCounts::increment(std::int64_t state, int action) {
  if (state < 0 || state >= num_states_ || action < 0 || action >= num_actions_) {
    throw std::out_of_range("tabular count index out of range");
  }
  ++counts_[std::size_t(state * num_actions_ + action)];
  ++total_;
}

// ------------------------------------------------------------ visit counters

void VisitCounter::count_many(const State& s, std::span<const Action> actions,
                              std::span<double> out) const {
  for (std::size_t i = 0; i < actions.size(); ++i) out[i] = count(s, actions[i]);
}

TabularCounter::TabularCounter(const Environment& env)
    : env_(env.clone()), table_(env.spec().num_states, env.spec().actions.num_discrete) {
  if (!env.spec().actions.is_discrete() || env.spec().num_states < 1) {
    throw std::invalid_argument("tabular counts need finite states and discrete actions");
  }
}

double TabularCounter::count(const State& s, const Action& a) const {
  return double(table_.count(*env_->state_index(s), a.index));
}

void TabularCounter::add(const State& s, const Action& a) {
  table_.increment(*env_->state_index(s), a.index);
}

std::unique_ptr<VisitCounter> TabularCounter::clone() const {
  return std::make_unique<TabularCounter>(*this);
}

KernelCounter::KernelCounter(const EnvSpec& spec, CountTable::Options options)
    : norm_(spec.state_bounds, spec.actions), table_([&] {
        options.state_dims = int(spec.state_bounds.dims());
        options.action_dims = int(spec.actions.dims());
        return options;
      }()) {}

double KernelCounter::count(const State& s, const Action& a) const {
  return table_.pseudo_count(norm_.normalize(s, a));
}

void KernelCounter::add(const State& s, const Action& a) { table_.insert(norm_.normalize(s, a)); }

void KernelCounter::count_many(const State& s, std::span<const Action> actions,
                               std::span<double> out) const {
  std::vector<double> prefix(norm_.state_dims());
  norm_.normalize_state(s, prefix);
  Eigen::MatrixXd suffixes(Eigen::Index(norm_.action_dims()), Eigen::Index(actions.size()));
  std::vector<double> buf(norm_.action_dims());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    norm_.normalize_action(actions[i], buf);
    for (std::size_t j = 0; j < buf.size(); ++j) suffixes(Eigen::Index(j), Eigen::Index(i)) = buf[j];
  }
  table_.pseudo_counts(prefix, suffixes, out);
}

std::unique_ptr<VisitCounter> KernelCounter::clone() const { return std::make_unique<KernelCounter>(*this); }

}  // namespace explab
