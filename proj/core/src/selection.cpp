#include "halfspec/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "halfspec/error.hpp"
#include "halfspec/parallel.hpp"

namespace halfspec {

void SelectionConfig::validate() const {
  if (!(ratio > 1.0) || !std::isfinite(ratio)) throw InvalidInput("ratio must exceed 1");
  if (M < 1) throw InvalidInput("M must be at least 1");
  if (!(d_min >= 0.0)) throw InvalidInput("d_min must be nonnegative");
  if (seed_grid_subsample.first < 1 || seed_grid_subsample.second < 1)
    throw InvalidInput("seed grid strides must be at least 1");
  if (!(index_bits_per_pair > 0.0)) throw InvalidInput("index bits per pair must be positive");
}

bool BudgetReport::fits(std::size_t c0, std::size_t c_plus) const {
  const double used = static_cast<double>(c0) + 2.0 * static_cast<double>(c_plus) +
                      static_cast<double>(c0 + c_plus) * index_bits_per_pair / 32.0;
  return used <= remaining;
}

BudgetReport compute_budget(double ratio, std::size_t n, std::size_t T, double index_bits_per_pair) {
  if (!(ratio > 1.0)) throw InvalidInput("compression ratio must exceed 1");
  BudgetReport b;
  b.ratio = ratio;
  b.n = n;
  b.T = T;
  b.index_bits_per_pair = index_bits_per_pair;
  const double nT = static_cast<double>(n) * static_cast<double>(T);
  b.total_numbers = nT / ratio;
  b.model_numbers = 3 + 3 * n + (5 * T + 1) / 2;
  b.remaining = b.total_numbers - static_cast<double>(b.model_numbers);
  b.byte_limit = static_cast<std::size_t>(std::floor(4.0 * nT / ratio));
  if (b.remaining < 0.0) {
    throw BudgetError("ratio " + std::to_string(ratio) + " leaves no room for the model (" +
                      std::to_string(b.model_numbers) + " numbers > budget " +
                      std::to_string(b.total_numbers) + ")");
  }
  return b;
}

std::vector<std::size_t> seed_grid(const Grid& grid, std::pair<std::size_t, std::size_t> strides) {
  if (strides.first < 1 || strides.second < 1) throw InvalidInput("strides must be at least 1");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < grid.n_lat(); i += strides.first)
    for (std::size_t j = 0; j < grid.n_lon(); j += strides.second) out.push_back(i * grid.n_lon() + j);
  return out;
}

std::vector<std::size_t> pick_batch(const Eigen::VectorXcd& residual,
                                    std::span<const std::size_t> unstored,
                                    const UnitSphereCoords& coords, std::size_t m, double d_min,
                                    std::span<const std::size_t> blocked) {
  if (m < 1) throw InvalidInput("batch size must be at least 1");
  std::vector<std::pair<double, std::size_t>> cand;
  cand.reserve(unstored.size());
  for (auto p : unstored) cand.emplace_back(std::norm(residual[static_cast<Eigen::Index>(p)]), p);
  std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::size_t> accepted;
  auto far_from = [&](std::size_t p, std::span<const std::size_t> others) {
    for (auto q : others)
      if (chordal_distance(coords[p], coords[q]) < d_min) return false;
    return true;
  };
  for (const auto& [value, p] : cand) {
    if (accepted.size() >= m) break;
    if (d_min > 0.0 && (!far_from(p, accepted) || !far_from(p, blocked))) continue;
    accepted.push_back(p);
  }
  return accepted;
}

std::vector<std::size_t> allocate_m_k(std::span<const double> D, std::size_t M,
                                      std::span<const std::size_t> capacity) {
  const std::size_t K = D.size();
  if (!capacity.empty() && capacity.size() != K) throw InvalidInput("capacity length mismatch");
  std::vector<std::size_t> m(K, 0);
  std::vector<std::uint8_t> eligible(K, 0);
  for (std::size_t k = 0; k < K; ++k)
    eligible[k] = (capacity.empty() || capacity[k] > 0) && D[k] > 0.0 && std::isfinite(D[k]);
  bool any = std::any_of(eligible.begin(), eligible.end(), [](auto e) { return e != 0; });
  if (!any) throw InvalidInput("allocate_m_k: no frequency has a positive score");

  std::size_t left = M;
  while (left > 0) {
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k)
      if (eligible[k]) total += D[k];
    if (!(total > 0.0)) break;
    std::vector<std::size_t> share(K, 0);
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t given = 0;
    for (std::size_t k = 0; k < K; ++k) {
      if (!eligible[k]) continue;
      const double exact = D[k] / total * static_cast<double>(left);
      share[k] = static_cast<std::size_t>(std::floor(exact));
      given += share[k];
      rem.emplace_back(exact - std::floor(exact), k);
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (std::size_t i = 0; given < left && i < rem.size(); ++i, ++given) ++share[rem[i].second];

    // cap at capacity, hand the excess to the remaining frequencies
    bool capped = false;
    for (std::size_t k = 0; k < K; ++k) {
      if (!eligible[k]) continue;
      const std::size_t cap = capacity.empty() ? SIZE_MAX : capacity[k] - m[k];
      if (share[k] >= cap) {
        m[k] += cap;
        left -= cap;
        eligible[k] = 0;
        capped = true;
      }
    }
    if (capped) continue;
    for (std::size_t k = 0; k < K; ++k) m[k] += share[k];
    left = 0;
  }
  return m;
}

// ---------------------------------------------------------------------------

namespace {

struct RowResult {
  Eigen::VectorXcd r;
  double score = -1.0;
};

class Selector {
 public:
  Selector(const SelectionProblem& p, const SelectionConfig& c, const CoherenceParams& initial)
      : p_(p), c_(c), n_(p.grid->size()), K_(p.field->K()) {
    c_.validate();
    if (initial.kappa.size() != K_ || initial.fixed_mask.size() != K_)
      throw InvalidInput("coherence parameters do not match the spectrum size");
    res_.coherence = initial;
    res_.kappa0 = initial.kappa;
    res_.kappa_at_bound.assign(K_, 0);
    res_.budget = compute_budget(c_.ratio, n_, p.T, c_.index_bits_per_pair);
    mask_.assign(K_, std::vector<std::uint8_t>(n_, 0));
    res_.state.partitions.resize(K_);
    res_.state.scores.assign(K_, -1.0);
    res_.state.residuals = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(K_));

    const Eigen::ArrayXXd sqrt_f = p.spectra->values.array().sqrt();
    sqrt_f_ = sqrt_f.matrix();
    z_ = (p.field->coeffs.array() / sqrt_f.cast<std::complex<double>>()).matrix();
    log_f_ = p.spectra->values.array().log().matrix();
  }

  SelectionResult run() {
    add_seed_grids();
    for (std::size_t k = 0; k < K_; ++k) rebuild_partition(k);
    recompute_all();
    log_line("start stored=" + std::to_string(res_.state.count()));

    std::size_t next_milestone = 1;
    bool exhausted = false;
    while (!exhausted) {
      const bool progressed = c_.variant == Variant::sequential ? sequential_step(exhausted)
                                                                  : distributed_step(exhausted);
      ++res_.iterations;
      if (!progressed) break;
      // one stop per batch even if it crosses several milestones; the last
      // stop coincides with the final re-estimation
      std::size_t reached = next_milestone;
      while (reached <= c_.J &&
             used_fraction() >= static_cast<double>(reached) / static_cast<double>(c_.J + 1))
        ++reached;
      if (reached > next_milestone && !exhausted) {
        reestimate();
        recompute_all();
        log_line("reestimate j=" + std::to_string(reached - 1) + " stored=" +
                 std::to_string(res_.state.count()));
      }
      next_milestone = reached;
    }
    reestimate();
    log_line("final stored=" + std::to_string(res_.state.count()) + " real=" +
             std::to_string(res_.state.real_count) + " complex=" +
             std::to_string(res_.state.complex_count) + " bytes=" + std::to_string(archive_bytes()));
    res_.archive_bytes = archive_bytes();
    return std::move(res_);
  }

 private:
  bool is_real(std::size_t k) const { return is_real_frequency(k, p_.T); }

  std::size_t archive_bytes(std::size_t index_bytes, std::size_t values) const {
    return p_.fixed_bytes + index_bytes + 4 * values;
  }
  std::size_t value_count() const { return res_.state.real_count + 2 * res_.state.complex_count; }
  std::size_t archive_bytes() const { return archive_bytes(res_.state.index.bytes(), value_count()); }

  double used_fraction() const {
    const auto& s = res_.state;
    const double used = static_cast<double>(s.real_count) + 2.0 * static_cast<double>(s.complex_count) +
                        static_cast<double>(s.count()) * c_.index_bits_per_pair / 32.0;
    return res_.budget.remaining > 0.0 ? used / res_.budget.remaining : 1.0;
  }

  bool try_add(std::size_t k, std::size_t pixel) {
    auto& s = res_.state;
    if (mask_[k][pixel]) throw InvalidInput("coefficient already stored");
    const bool real = is_real(k);
    const std::size_t c0 = s.real_count + (real ? 1 : 0);
    const std::size_t cp = s.complex_count + (real ? 0 : 1);
    if (!res_.budget.fits(c0, cp)) return false;
    const std::uint64_t key = static_cast<std::uint64_t>(k) * n_ + pixel;
    const std::size_t bytes = archive_bytes(s.index.bytes_with(key), c0 + 2 * cp);
    if (bytes > res_.budget.byte_limit) return false;
    s.index.insert(key);
    mask_[k][pixel] = 1;
    s.real_count = c0;
    s.complex_count = cp;
    return true;
  }

  void add_seed_grids() {
    const auto seeds = seed_grid(*p_.grid, c_.seed_grid_subsample);
    for (std::size_t k = 0; k < std::min<std::size_t>(2, K_); ++k)
      for (auto p : seeds)
        if (!try_add(k, p))
          throw BudgetError("seed grids at k = 0, 1 do not fit the budget at ratio " +
                            std::to_string(c_.ratio));
  }

  void rebuild_partition(std::size_t k) {
    auto& part = res_.state.partitions[k];
    part.k = k;
    part.stored.clear();
    part.unstored.clear();
    for (std::size_t i = 0; i < n_; ++i) (mask_[k][i] ? part.stored : part.unstored).push_back(i);
  }

  RowResult compute_row(std::size_t k) const {
    const auto& part = res_.state.partitions[k];
    RowResult out;
    const auto col = static_cast<Eigen::Index>(k);
    const Eigen::VectorXcd z = z_.col(col);
    Eigen::VectorXcd zhat;
    if (part.unstored.empty()) {
      zhat = z;
    } else {
      ConditionalSystem sys(*p_.op, part.stored);
      sys.set_kappa(res_.coherence.kappa[k]);
      zhat = sys.conditional_mean(z);
    }
    out.r = (z - zhat).cwiseProduct(sqrt_f_.col(col).cast<std::complex<double>>());
    for (auto s : part.stored) out.r[static_cast<Eigen::Index>(s)] = 0.0;
    if (is_real(k)) out.r.imag().setZero();
    for (auto u : part.unstored) out.score = std::max(out.score, std::norm(out.r[static_cast<Eigen::Index>(u)]));
    return out;
  }

  void store_row(std::size_t k, RowResult&& row) {
    res_.state.residuals.col(static_cast<Eigen::Index>(k)) = row.r;
    res_.state.scores[k] = row.score;
  }

  void recompute(const std::vector<std::size_t>& ks) {
    std::vector<RowResult> rows(ks.size());
    parallel_for(ks.size(), c_.threads, [&](std::size_t i) { rows[i] = compute_row(ks[i]); });
    for (std::size_t i = 0; i < ks.size(); ++i) store_row(ks[i], std::move(rows[i]));
  }

  void recompute_all() {
    std::vector<std::size_t> ks(K_);
    std::iota(ks.begin(), ks.end(), 0);
    recompute(ks);
  }

  std::vector<std::size_t> batch_for(std::size_t k, std::size_t m) const {
    const auto& part = res_.state.partitions[k];
    const std::span<const std::size_t> blocked =
        c_.d_min_across_batches ? std::span<const std::size_t>(part.stored) : std::span<const std::size_t>();
    return pick_batch(res_.state.residuals.col(static_cast<Eigen::Index>(k)), part.unstored,
                      *p_.coords, m, c_.d_min, blocked);
  }

  bool sequential_step(bool& exhausted) {
    const auto& D = res_.state.scores;
    std::size_t best = K_;
    for (std::size_t k = 0; k < K_; ++k)
      if (D[k] > 0.0 && (best == K_ || D[k] > D[best])) best = k;
    if (best == K_) return false;
    const double score = D[best];
    const auto batch = batch_for(best, c_.M);
    std::size_t added = 0;
    for (auto p : batch) {
      if (!try_add(best, p)) {
        exhausted = true;
        break;
      }
      ++added;
    }
    if (batch.empty()) res_.state.scores[best] = -1.0;  // every candidate blocked by d_min
    if (added > 0) {
      rebuild_partition(best);
      recompute({best});
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "iter=%zu k=%zu batch=%zu D=%.9e stored=%zu", res_.iterations + 1,
                  best, added, score, res_.state.count());
    log_line(buf);
    return added > 0 || !batch.empty() || !exhausted;
  }

  bool distributed_step(bool& exhausted) {
    const auto& s = res_.state;
    std::vector<std::size_t> capacity(K_);
    bool any = false;
    for (std::size_t k = 0; k < K_; ++k) {
      capacity[k] = s.scores[k] > 0.0 ? s.partitions[k].unstored.size() : 0;
      any = any || capacity[k] > 0;
    }
    if (!any) return false;
    const auto m = allocate_m_k(s.scores, c_.M, capacity);
    std::vector<std::size_t> ks;
    for (std::size_t k = 0; k < K_; ++k)
      if (m[k] > 0) ks.push_back(k);
    std::vector<std::vector<std::size_t>> batches(ks.size());
    parallel_for(ks.size(), c_.threads, [&](std::size_t i) { batches[i] = batch_for(ks[i], m[ks[i]]); });

    std::vector<std::size_t> touched;
    std::size_t added_total = 0;
    for (std::size_t i = 0; i < ks.size() && !exhausted; ++i) {
      std::size_t added = 0;
      for (auto p : batches[i]) {
        if (!try_add(ks[i], p)) {
          exhausted = true;
          break;
        }
        ++added;
      }
      if (batches[i].empty()) res_.state.scores[ks[i]] = -1.0;
      if (added > 0) {
        rebuild_partition(ks[i]);
        touched.push_back(ks[i]);
      }
      added_total += added;
    }
    recompute(touched);
    char buf[160];
    std::snprintf(buf, sizeof buf, "iter=%zu frequencies=%zu batch=%zu stored=%zu", res_.iterations + 1,
                  touched.size(), added_total, res_.state.count());
    log_line(buf);
    return true;
  }

  void reestimate() {
    std::vector<std::size_t> ks;
    for (std::size_t k = 0; k < K_; ++k)
      if (!res_.coherence.fixed_mask[k] && !res_.state.partitions[k].unstored.empty()) ks.push_back(k);
    std::vector<KappaEstimate> est(ks.size());
    parallel_for(ks.size(), c_.threads, [&](std::size_t i) {
      const auto k = ks[i];
      const auto col = static_cast<Eigen::Index>(k);
      est[i] = estimate_kappa(KappaObjective::conditional, *p_.op, res_.state.partitions[k].stored,
                              z_.col(col), log_f_.col(col), is_real(k), res_.kappa0[k]);
    });
    for (std::size_t i = 0; i < ks.size(); ++i) {
      res_.coherence.kappa[ks[i]] = est[i].kappa;
      res_.kappa_at_bound[ks[i]] = est[i].at_bound;
    }
    ++res_.reestimations;
  }

  void log_line(std::string s) { res_.trace.push_back(std::move(s)); }

  const SelectionProblem& p_;
  SelectionConfig c_;
  std::size_t n_, K_;
  Eigen::MatrixXd sqrt_f_, log_f_;
  Eigen::MatrixXcd z_;
  std::vector<std::vector<std::uint8_t>> mask_;
  SelectionResult res_;
};

}  // namespace

CoherenceParams estimate_initial_kappa(const SelectionProblem& p, CoherenceParams params,
                                       unsigned threads, std::vector<std::uint8_t>* at_bound) {
  const std::size_t K = p.field->K();
  if (params.kappa.size() != K) throw InvalidInput("coherence parameters do not match the spectrum size");
  std::vector<std::size_t> ks;
  for (std::size_t k = 0; k < K; ++k)
    if (!params.fixed_mask[k]) ks.push_back(k);
  std::vector<KappaEstimate> est(ks.size());
  parallel_for(ks.size(), threads, [&](std::size_t i) {
    const auto k = ks[i];
    const auto col = static_cast<Eigen::Index>(k);
    const Eigen::ArrayXd f = p.spectra->values.col(col).array();
    const Eigen::VectorXcd z = (p.field->coeffs.col(col).array() / f.sqrt().cast<std::complex<double>>()).matrix();
    est[i] = estimate_kappa(KappaObjective::marginal, *p.op, {}, z, f.log().matrix(),
                            is_real_frequency(k, p.T), params.kappa[k]);
  });
  if (at_bound) at_bound->assign(K, 0);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    params.kappa[ks[i]] = est[i].kappa;
    if (at_bound) (*at_bound)[ks[i]] = est[i].at_bound;
  }
  return params;
}

SelectionResult run_selection(const SelectionProblem& problem, const SelectionConfig& config,
                              const CoherenceParams& initial) {
  if (!problem.grid || !problem.op || !problem.coords || !problem.field || !problem.spectra)
    throw InvalidInput("incomplete selection problem");
  return Selector(problem, config, initial).run();
}

}  // namespace halfspec
