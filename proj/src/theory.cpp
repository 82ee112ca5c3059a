#include "sparselb/theory.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace sparselb {

namespace {
constexpr std::uint64_t kExitTag = 0x65786974746d7231ULL;
constexpr std::uint64_t kMsgTag = 0x6d73676976616c31ULL;
constexpr std::uint64_t kScaleTag = 0x7363616c65727531ULL;

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
}  // namespace

MeanEstimate estimate_mean(const std::vector<double>& samples) {
  MeanEstimate e;
  e.count = samples.size();
  if (samples.empty()) return e;
  double sum = 0.0;
  for (double v : samples) sum += v;
  e.mean = sum / static_cast<double>(samples.size());
  if (samples.size() < 2) return e;
  double ss = 0.0;
  for (double v : samples) ss += (v - e.mean) * (v - e.mean);
  const double var = ss / static_cast<double>(samples.size() - 1);
  e.ci_halfwidth = 1.96 * std::sqrt(var / static_cast<double>(samples.size()));
  return e;
}

ExitTimeResult poisson_exit_times(double mu, std::uint64_t y, std::uint64_t trials,
                                  std::uint64_t seed) {
  if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
  if (y < 1) throw std::invalid_argument("y must be at least 1");
  ExitTimeResult r;
  r.mu = mu;
  r.y = y;
  r.trials = trials;
  r.tracking_bound = (static_cast<double>(y * y) - static_cast<double>(y)) / mu;
  r.deviation_bound = static_cast<double>(y * y) / mu;

  std::vector<double> tracking, deviation;
  tracking.reserve(trials);
  deviation.reserve(trials);
  const double target = static_cast<double>(y);

  for (std::uint64_t trial = 0; trial < trials; ++trial) {
    // Tracking: +1 at Poisson jumps, -1 at the deterministic ticks k/mu.
    {
      Rng rng(derive_seed(seed, kExitTag, 2 * trial));
      std::int64_t x = 0;
      double t_jump = rng.exponential(mu);
      std::uint64_t tick = 1;
      while (true) {
        const double t_tick = static_cast<double>(tick) / mu;
        double now;
        if (t_jump < t_tick) {
          now = t_jump;
          ++x;
          t_jump = now + rng.exponential(mu);
        } else if (t_tick < t_jump) {
          now = t_tick;
          --x;
          ++tick;
        } else {
          // Simultaneous jump and tick cancel; no crossing can occur here.
          now = t_tick;
          t_jump = now + rng.exponential(mu);
          ++tick;
          continue;
        }
        if (x == static_cast<std::int64_t>(y) || -x == static_cast<std::int64_t>(y)) {
          tracking.push_back(now);
          break;
        }
      }
    }
    // Deviation: drifts down at rate mu between jumps, +1 at jumps. Crossing
    // happens either exactly when the drift reaches -y or at a jump landing
    // at or above +y.
    {
      Rng rng(derive_seed(seed, kExitTag, 2 * trial + 1));
      double t = 0.0, value = 0.0;
      while (true) {
        const double down_cross = t + (value + target) / mu;
        const double t_jump = t + rng.exponential(mu);
        if (down_cross <= t_jump) {
          deviation.push_back(down_cross);
          break;
        }
        value += 1.0 - mu * (t_jump - t);
        t = t_jump;
        if (value >= target) {
          deviation.push_back(t);
          break;
        }
      }
    }
  }

  r.tracking = estimate_mean(tracking);
  r.deviation = estimate_mean(deviation);
  return r;
}

IntermessageResult intermessage_durations(std::uint32_t x, double mu, double lambda,
                                          bool infinite_backlog, double horizon,
                                          std::uint32_t trials, std::uint64_t seed) {
  if (x < 2) throw std::invalid_argument("x must be at least 2");
  if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
  IntermessageResult r;
  r.x = x;
  r.mu = mu;
  r.infinite_backlog = infinite_backlog;
  r.bound_backlog = static_cast<double>(x) * (static_cast<double>(x) - 1.0) / mu;
  r.bound_general = (static_cast<double>(x) / 2.0 - 1.0) *
                    (static_cast<double>(x) / 2.0 - 1.0) / mu;

  std::vector<double> all, first;
  for (std::uint32_t trial = 0; trial < trials; ++trial) {
    EnvConfig cfg;
    cfg.engine = EngineKind::event;
    cfg.servers = 1;
    cfg.horizon = horizon;
    cfg.mu = {mu};
    cfg.service = ServiceSpec{ServiceLaw::exponential, 1.0, 0.0, 0.0};
    cfg.policy = PolicySpec{PolicyKind::jsaq, 2, TieBreak::lowest_index};
    cfg.comm = CommSpec{CommKind::et, x, 0.0};
    cfg.approx = ApproxSpec{ApproxKind::msr, 0, 1.0};
    cfg.seed = derive_seed(seed, kMsgTag, trial);
    cfg.record_message_times = true;
    if (infinite_backlog) {
      // Enough work that neither the queue nor the estimate can drain.
      cfg.initial_backlog =
          static_cast<std::uint64_t>(std::ceil(1.5 * mu * horizon)) + 10 * x + 100;
    } else {
      cfg.rate_profile = {{0.0, lambda}};
    }
    const MetricsLog log = run(cfg);
    if (log.total_violations() != 0)
      throw std::runtime_error("invariant violation inside inter-message run");
    if (infinite_backlog && log.departures >= log.arrivals)
      throw std::runtime_error("backlog drained; horizon too long for the preload");

    const auto& times = log.per_server_message_times.at(0);
    double prev = 0.0;
    for (std::size_t j = 0; j < times.size(); ++j) {
      const double gap = times[j] - prev;
      all.push_back(gap);
      if (j == 0) first.push_back(gap);
      prev = times[j];
    }
  }
  r.intervals = all.size();
  r.all_intervals = estimate_mean(all);
  r.first_intervals = estimate_mean(first);
  return r;
}

void ScalingConfig::validate() const {
  if (n_values.empty()) throw std::invalid_argument("need at least one n");
  if (servers < 1) throw std::invalid_argument("need at least one server");
  if (!mu_bar.empty() && mu_bar.size() != servers)
    throw std::invalid_argument("mu_bar must be empty or one rate per server");
  if (lambda_bar.empty()) throw std::invalid_argument("need an arrival profile");
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (replications < 1) throw std::invalid_argument("need at least one replication");

  // Work must keep every server busy in the limit: the lowest arrival rate
  // on the window has to exceed the capacity of all servers but the slowest.
  double mu_sum = 0.0, mu_min = 0.0;
  for (std::uint32_t i = 0; i < servers; ++i) {
    const double m = mu_bar_of(i);
    mu_sum += m;
    mu_min = i == 0 ? m : std::min(mu_min, m);
  }
  double lambda_min = 0.0, lambda_max = 0.0;
  bool seen = false;
  for (const auto& piece : lambda_bar) {
    if (piece.start >= horizon) break;
    if (!(piece.rate >= 0.0) || !std::isfinite(piece.rate))
      throw std::invalid_argument("arrival profile rates must be finite and nonnegative");
    lambda_min = seen ? std::min(lambda_min, piece.rate) : piece.rate;
    lambda_max = seen ? std::max(lambda_max, piece.rate) : piece.rate;
    seen = true;
  }
  if (!seen) throw std::invalid_argument("arrival profile never covers the horizon");
  if (!(lambda_min > mu_sum - static_cast<double>(servers) * mu_min))
    throw std::invalid_argument(
        "arrival rate too low: some server would starve in the scaling limit");
  if (service.law == ServiceLaw::exponential)
    throw std::invalid_argument("scaling sweep needs bounded requirements");
}

ScalingResult run_scaling_suite(const ScalingConfig& cfg) {
  cfg.validate();
  struct Cell {
    std::uint64_t n;
    std::uint32_t rep;
    double spread = 0.0;
    double workload = 0.0;
  };
  std::vector<Cell> cells;
  for (std::uint64_t n : cfg.n_values)
    for (std::uint32_t rep = 0; rep < cfg.replications; ++rep)
      cells.push_back({n, rep, 0.0, 0.0});

  auto run_cell = [&](Cell& cell) {
    EnvConfig ec;
    ec.engine = EngineKind::event;
    ec.servers = cfg.servers;
    ec.horizon = cfg.horizon;
    ec.service = cfg.service;
    ec.mu.resize(cfg.servers);
    for (std::uint32_t i = 0; i < cfg.servers; ++i)
      ec.mu[i] = cfg.mu_bar_of(i) * static_cast<double>(cell.n);
    ec.rate_profile = cfg.lambda_bar;
    for (auto& piece : ec.rate_profile) piece.rate *= static_cast<double>(cell.n);
    ec.policy = PolicySpec{PolicyKind::jsaq, 2, TieBreak::lowest_index};
    ec.comm = CommSpec{CommKind::et, cfg.x, 0.0};
    ec.approx = ApproxSpec{ApproxKind::msr, 0, 1.0};
    ec.coupled = true;
    ec.seed = derive_seed(cfg.seed, kScaleTag ^ cell.n, cell.rep);
    const MetricsLog log = run(ec);
    if (log.total_violations() != 0)
      throw std::runtime_error("invariant violation inside scaling run");
    const double root = std::sqrt(static_cast<double>(cell.n));
    cell.spread = log.sup_queue_spread / root;
    cell.workload = log.gap_max / root;
  };

  const std::uint32_t workers =
      std::max<std::uint32_t>(1, std::min<std::uint32_t>(cfg.threads,
                                  static_cast<std::uint32_t>(cells.size())));
  if (workers == 1) {
    for (auto& cell : cells) run_cell(cell);
  } else {
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::uint32_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        while (true) {
          const std::size_t k = cursor.fetch_add(1);
          if (k >= cells.size()) return;
          try {
            run_cell(cells[k]);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mu);
            if (!failure) failure = std::current_exception();
            cursor.store(cells.size());
            return;
          }
        }
      });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  ScalingResult result;
  for (std::uint64_t n : cfg.n_values) {
    std::vector<double> spreads, workloads;
    for (const auto& cell : cells)
      if (cell.n == n) {
        spreads.push_back(cell.spread);
        workloads.push_back(cell.workload);
      }
    ScalingPoint p;
    p.n = n;
    p.replications = static_cast<std::uint32_t>(spreads.size());
    p.spread_median = median_of(spreads);
    p.workload_median = median_of(workloads);
    result.points.push_back(p);
  }
  return result;
}

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  if (n != ys.size() || n < 2) return 0.0;
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return v[a] < v[b];
    });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
    return r;
  };
  const std::vector<double> rx = ranks(xs), ry = ranks(ys);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double num = 0.0, dx = 0.0, dy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  if (dx == 0.0 || dy == 0.0) return 0.0;
  return num / std::sqrt(dx * dy);
}

}  // namespace sparselb
