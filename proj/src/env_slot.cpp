#include <deque>

#include "sparselb/env.hpp"

namespace sparselb {

namespace {

constexpr std::uint64_t kRoutingTag = 0x726f757465726e67ULL;

struct QueuedJob {
  JobId id;
  double requirement;  // whole work units
};

struct SlotServer {
  std::deque<QueuedJob> fifo;
  double head_remaining = 0.0;  // whole work units left on the head job
  double workload = 0.0;        // total remaining work units in the queue
  std::uint64_t arrivals = 0;
  std::uint64_t departures = 0;
  std::uint64_t idle_slots = 0;
  double last_departed_arrival = 0.0;  // FIFO order witness
};

}  // namespace

// Discrete-time engine. Each slot runs four phases in a fixed order:
//   1. service: every busy server completes one work unit, possibly
//      departing its head job;
//   2. emulation: the balancer's emulated queues (and the servers' mirrors)
//      advance by one work unit;
//   3. communication: triggers are evaluated and messages land instantly;
//   4. arrival: at most one job arrives and is routed on post-message state.
// Metrics are sampled at the slot boundary after all four phases.
MetricsLog run_slot(const EnvConfig& cfg) {
  const std::uint32_t K = cfg.servers;
  const auto horizon = static_cast<std::uint64_t>(cfg.horizon);
  const bool estimator = cfg.has_estimator();
  const bool track_error = estimator;
  // Error bounds guaranteed by construction: et for any estimate law, dt for
  // laws that never emit more than x-1 emulated departures per interval.
  const bool bounded_error =
      (cfg.comm.kind == CommKind::et) ||
      (cfg.comm.kind == CommKind::dt && cfg.approx.kind != ApproxKind::msr);

  ApproxSpec approx = cfg.approx;
  approx.mean_requirement = cfg.service.mean_nominal();
  if (approx.kind == ApproxKind::msrx && approx.x == 0) approx.x = cfg.comm.x;

  InputStream in(cfg.seed, cfg.service, cfg.lambda);
  RoutingState router(derive_seed(cfg.seed, kRoutingTag));
  StreamDigest digest;

  // Servers replay the balancer's emulation only under error triggering;
  // timer and departure-count patterns decide without it.
  const bool mirrored = estimator && cfg.comm.kind == CommKind::et;

  std::vector<SlotServer> servers(K);
  std::vector<EmulatedQueue> emu;
  std::vector<ServerCommState> comm_state;
  if (estimator) {
    emu.assign(K, EmulatedQueue(approx));
    comm_state.resize(K);
    for (auto& cs : comm_state) {
      cs.mirror = EmulatedQueue(approx);
      cs.mirror.on_message(0);
    }
    for (auto& e : emu) e.on_message(0);  // estimates start exact: empty system
  }

  MetricsLog log;
  log.horizon = cfg.horizon;
  log.seed = cfg.seed;
  log.coupled = cfg.coupled;
  log.collect_trace = cfg.collect_trace;
  log.per_server_arrivals.assign(K, 0);
  log.per_server_departures.assign(K, 0);
  log.per_server_messages.assign(K, 0);
  if (cfg.record_message_times) log.per_server_message_times.assign(K, {});

  std::vector<double> arrival_time;  // indexed by job id
  std::vector<std::uint64_t> view(K);

  // Coupled reference: one server absorbing every job at K work units/slot.
  double ref_workload = 0.0;
  bool gap_seen = false;

  const double job_rate = 1.0 / cfg.service.mean_nominal();  // jobs per slot when busy

  for (std::uint64_t slot = 1; slot <= horizon; ++slot) {
    const double now = static_cast<double>(slot);

    // Phase 1: service.
    for (std::uint32_t i = 0; i < K; ++i) {
      SlotServer& s = servers[i];
      if (s.fifo.empty()) {
        ++s.idle_slots;
        continue;
      }
      s.head_remaining -= 1.0;
      s.workload -= 1.0;
      if (s.head_remaining == 0.0) {
        const QueuedJob done = s.fifo.front();
        s.fifo.pop_front();
        ++s.departures;
        ++log.departures;
        ++log.per_server_departures[i];
        if (estimator) ++comm_state[i].departures_since_message;
        const double at = arrival_time[done.id];
        if (at < s.last_departed_arrival) log.bump("fifo_order");
        s.last_departed_arrival = at;
        log.jct.push_back(now - at);
        log.jct_arrival_index.push_back(done.id);
        if (cfg.policy.charges_message_per_departure()) {
          ++log.messages;
          ++log.per_server_messages[i];
        }
        if (!s.fifo.empty()) s.head_remaining = s.fifo.front().requirement;
        if (log.collect_trace)
          log.trace.push_back({now, 'd', static_cast<ServerId>(i), done.id});
      }
    }
    if (cfg.coupled) {
      ref_workload -= static_cast<double>(K);
      if (ref_workload < 0.0) ref_workload = 0.0;
    }

    // Phase 2: emulation advances one work unit everywhere.
    if (estimator) {
      for (std::uint32_t i = 0; i < K; ++i) {
        emu[i].advance(1.0);
        if (mirrored) comm_state[i].mirror.advance(1.0);
      }
    }

    // Phase 3: communication.
    if (estimator) {
      for (std::uint32_t i = 0; i < K; ++i) {
        const std::uint64_t q = servers[i].fifo.size();
        if (!should_message(cfg.comm, comm_state[i], q, now)) continue;
        const MessageEvent msg =
            emit_message(cfg.comm, comm_state[i], q, static_cast<ServerId>(i), now);
        emu[i].on_message(msg.queue_length);
        ++log.messages;
        ++log.per_server_messages[i];
        if (cfg.record_message_times) log.per_server_message_times[i].push_back(now);
        if (log.collect_trace)
          log.trace.push_back({now, 'm', static_cast<ServerId>(i), msg.queue_length});
      }
    }

    // Phase 4: arrival and routing.
    if (in.arrival_in_slot(slot)) {
      const JobId id = log.arrivals++;
      const double req = in.requirement_of(id);
      digest.add_u64(slot);
      digest.add_double(req);
      arrival_time.push_back(now);
      if (cfg.policy.uses_estimates())
        for (std::uint32_t i = 0; i < K; ++i) view[i] = emu[i].estimate();
      else
        for (std::uint32_t i = 0; i < K; ++i) view[i] = servers[i].fifo.size();
      const ServerId dest = route(cfg.policy, view, router);
      SlotServer& s = servers[dest];
      if (s.fifo.empty()) s.head_remaining = req;
      s.fifo.push_back({id, req});
      s.workload += req;
      ++s.arrivals;
      ++log.per_server_arrivals[dest];
      if (estimator) {
        emu[dest].on_routed_arrival();
        if (mirrored) comm_state[dest].mirror.on_routed_arrival();
      }
      if (cfg.coupled) ref_workload += req;
      if (log.collect_trace) log.trace.push_back({now, 'a', dest, id});
    }

    // Slot boundary: sampling and invariant checks.
    std::uint64_t q_total = 0;
    std::uint64_t aq = 0;
    for (std::uint32_t i = 0; i < K; ++i) {
      const SlotServer& s = servers[i];
      const std::uint64_t q = s.fifo.size();
      q_total += q;
      if (q != s.arrivals - s.departures) log.bump("flow_conservation");
      // Work-conserving: a nonempty queue always has a head mid-service.
      if (!s.fifo.empty() && s.head_remaining < 1.0) log.bump("service_stall");
      if (track_error) {
        const std::uint64_t ae = approximation_error(q, emu[i]);
        aq = std::max(aq, ae);
        // Error equals the departure miscount within the interval.
        const std::uint64_t d_since = comm_state[i].departures_since_message;
        const std::uint64_t d_emu = emu[i].emulated_departures();
        const std::uint64_t miscount = d_since > d_emu ? d_since - d_emu : d_emu - d_since;
        if (ae != miscount) log.bump("ae_identity");
        if (emu[i].estimate() !=
            emu[i].anchor_length() + emu[i].arrivals_since_anchor() - d_emu)
          log.bump("estimate_flow");
        if (cfg.approx.kind == ApproxKind::basic && emu[i].estimate() < q)
          log.bump("basic_underestimate");
        if (bounded_error && ae > cfg.comm.x - 1) log.bump("error_bound");
        if (cfg.comm.kind == CommKind::et && !(comm_state[i].mirror == emu[i]))
          log.bump("mirror_divergence");
        if (cfg.comm.kind == CommKind::dt &&
            log.per_server_messages[i] != s.departures / cfg.comm.x)
          log.bump("dt_message_count");
        if (cfg.comm.kind == CommKind::et && cfg.approx.kind != ApproxKind::basic) {
          const double bound =
              (static_cast<double>(s.departures) + job_rate * now) /
              static_cast<double>(cfg.comm.x);
          if (static_cast<double>(log.per_server_messages[i]) > bound + 1e-9)
            log.bump("et_message_bound");
        }
      }
    }
    if (track_error) {
      ++log.ae_hist[aq];
      log.sup_aq = std::max(log.sup_aq, aq);
    }
    log.queue_time_integral += static_cast<double>(q_total);
    if (cfg.coupled) {
      double sum = 0.0;
      for (const auto& s : servers) sum += s.workload;
      const double gap = sum - ref_workload;
      if (gap < 0.0) log.bump("workload_dominance");
      if (!gap_seen) {
        log.gap_min = log.gap_max = gap;
        gap_seen = true;
      } else {
        log.gap_min = std::min(log.gap_min, gap);
        log.gap_max = std::max(log.gap_max, gap);
      }
      if (cfg.workload_stride > 0 && slot % cfg.workload_stride == 0) {
        log.workload_sample_times.push_back(now);
        log.workload_sum_samples.push_back(sum);
        log.workload_ref_samples.push_back(ref_workload);
      }
    }
  }

  log.stream_digest = digest.value();
  return log;
}

}  // namespace sparselb
