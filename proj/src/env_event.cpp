#include <cmath>
#include <deque>
#include <queue>

#include "sparselb/env.hpp"

namespace sparselb {

namespace {

constexpr std::uint64_t kRoutingTag = 0x726f757465726e67ULL;

// Simultaneity order: service completion, then emulated departure, then
// communication, then arrival; equal kinds by server index.
enum EvKind : int { kService = 0, kEmuDeparture = 1, kComm = 2, kArrival = 3 };

struct Ev {
  double time;
  int kind;
  std::uint32_t server;
  std::uint64_t gen;  // emulated departure generation stamp
};

struct EvAfter {
  bool operator()(const Ev& a, const Ev& b) const {
    if (a.time != b.time) return a.time > b.time;
    if (a.kind != b.kind) return a.kind > b.kind;
    return a.server > b.server;
  }
};

struct QueuedJob {
  JobId id;
  double requirement;
  double arrival_time;
};

// A FIFO server under continuous time. Workload between events is the exact
// queued sum plus the linearly draining head, so it hits zero precisely at
// the last departure event.
struct EventServer {
  std::deque<QueuedJob> fifo;
  double mu = 1.0;
  double head_start = 0.0;
  double queued_work = 0.0;  // requirements excluding the head
  std::uint64_t arrivals = 0;
  std::uint64_t departures = 0;
  double last_departed_arrival = 0.0;

  double head_completion() const { return head_start + fifo.front().requirement / mu; }
  double workload(double now) const {
    if (fifo.empty()) return 0.0;
    return queued_work + fifo.front().requirement - mu * (now - head_start);
  }
  // Returns the completion time of the new head, or -1 if nothing started.
  double push(QueuedJob job, double now) {
    if (fifo.empty()) {
      fifo.push_back(job);
      head_start = now;
      return head_completion();
    }
    queued_work += job.requirement;
    fifo.push_back(job);
    return -1.0;
  }
  double pop(double now) {
    fifo.pop_front();
    ++departures;
    if (fifo.empty()) return -1.0;
    queued_work -= fifo.front().requirement;
    head_start = now;
    return head_completion();
  }
};

bool mirror_signature_equal(const EmulatedQueue& a, const EmulatedQueue& b) {
  return a.anchor_length() == b.anchor_length() &&
         a.arrivals_since_anchor() == b.arrivals_since_anchor() &&
         a.emulated_departures() == b.emulated_departures() &&
         a.estimate() == b.estimate() && a.head_remaining() == b.head_remaining();
}

}  // namespace

// Continuous-time engine. Events are processed in (time, kind, server) order;
// metrics and invariants are sampled once per distinct timestamp after the
// whole batch of simultaneous events has applied. Communication triggered by
// a departure or an emulated departure is queued as a same-timestamp check
// event, so it lands after every simultaneous departure and before any
// simultaneous arrival. Emulated departures are scheduled at exact head
// completion instants and popped outright, never drained by float deltas.
MetricsLog run_event(const EnvConfig& cfg) {
  const std::uint32_t K = cfg.servers;
  const double T = cfg.horizon;
  const bool estimator = cfg.has_estimator();
  const bool bounded_error =
      (cfg.comm.kind == CommKind::et) ||
      (cfg.comm.kind == CommKind::dt && cfg.approx.kind != ApproxKind::msr);

  ApproxSpec approx = cfg.approx;
  approx.mean_requirement = cfg.service.mean_nominal();
  if (approx.kind == ApproxKind::msrx && approx.x == 0) approx.x = cfg.comm.x;

  std::vector<RatePiece> profile = cfg.rate_profile;
  if (profile.empty()) profile.push_back({0.0, 0.0});
  InputStream in(cfg.seed, cfg.service, profile, cfg.gap_law);
  ArrivalSequence arrivals_seq(in);
  RoutingState router(derive_seed(cfg.seed, kRoutingTag));
  StreamDigest digest;

  MetricsLog log;
  log.horizon = T;
  log.seed = cfg.seed;
  log.coupled = cfg.coupled;
  log.collect_trace = cfg.collect_trace;
  log.per_server_arrivals.assign(K, 0);
  log.per_server_departures.assign(K, 0);
  log.per_server_messages.assign(K, 0);
  if (cfg.record_message_times) log.per_server_message_times.assign(K, {});

  std::vector<EventServer> servers(K);
  for (std::uint32_t i = 0; i < K; ++i) servers[i].mu = cfg.mu_of(i);
  EventServer ref;  // coupled single-fast-server reference
  ref.mu = cfg.total_mu();

  // Servers replay the balancer's emulation only under error triggering;
  // timer and departure-count patterns decide without it.
  const bool mirrored = estimator && cfg.comm.kind == CommKind::et;

  std::vector<EmulatedQueue> emu;
  std::vector<ServerCommState> comm_state;
  std::vector<std::uint64_t> emu_gen;
  if (estimator) {
    emu.assign(K, EmulatedQueue(approx));
    comm_state.resize(K);
    emu_gen.assign(K, 0);
    for (auto& cs : comm_state) cs.mirror = EmulatedQueue(approx);
  }

  std::priority_queue<Ev, std::vector<Ev>, EvAfter> heap;

  // Reschedules the pending emulated departure for server i from scratch,
  // invalidating whatever was outstanding.
  auto reschedule_emudep = [&](std::uint32_t i, double now) {
    ++emu_gen[i];
    const double head = emu[i].head_remaining();
    if (head == kNeverDeparts) return;
    const double when = now + head / servers[i].mu;
    if (when <= T) heap.push({when, kEmuDeparture, i, emu_gen[i]});
  };

  // Initial state: backlog jobs queue at time zero, estimates start exact
  // (a free anchor at time zero, not a counted message).
  JobId next_id = 0;
  for (std::uint32_t i = 0; i < K && cfg.initial_backlog > 0; ++i) {
    for (std::uint64_t b = 0; b < cfg.initial_backlog; ++b) {
      const JobId id = next_id++;
      const double req = in.requirement_of(id);
      digest.add_u64(id);
      digest.add_double(req);
      const double done = servers[i].push({id, req, 0.0}, 0.0);
      if (done >= 0.0 && done <= T) heap.push({done, kService, i, 0});
      if (cfg.coupled) {
        const double rdone = ref.push({id, req, 0.0}, 0.0);
        if (rdone >= 0.0 && rdone <= T) heap.push({rdone, kService, K, 0});
      }
    }
    servers[i].arrivals = cfg.initial_backlog;
    log.per_server_arrivals[i] = cfg.initial_backlog;
  }
  log.arrivals = next_id;
  std::uint64_t q_total = next_id;
  if (estimator) {
    for (std::uint32_t i = 0; i < K; ++i) {
      emu[i].on_message(servers[i].fifo.size());
      if (mirrored) comm_state[i].mirror.on_message(servers[i].fifo.size());
      reschedule_emudep(i, 0.0);
    }
  }

  {
    const double first = arrivals_seq.next();
    if (first <= T) heap.push({first, kArrival, 0, 0});
  }
  std::vector<std::uint64_t> rt_timer_index;
  if (estimator && cfg.comm.kind == CommKind::rt) {
    rt_timer_index.assign(K, 1);
    const double period = 1.0 / cfg.comm.rate;
    for (std::uint32_t i = 0; i < K; ++i)
      if (period <= T) heap.push({period, kComm, i, 0});
  }

  double integral_clock = 0.0;
  bool gap_seen = false;
  std::uint64_t workload_sample_counter = 0;
  const double job_rate_scale = 1.0 / cfg.service.mean_nominal();
  std::vector<std::uint64_t> view(K);

  auto emit = [&](std::uint32_t i, double now) {
    const std::uint64_t q = servers[i].fifo.size();
    // The server-side replica must agree with the balancer exactly; checked
    // in full right before each reset.
    if (cfg.comm.kind == CommKind::et && !(comm_state[i].mirror == emu[i]))
      log.bump("mirror_divergence");
    const MessageEvent msg =
        emit_message(cfg.comm, comm_state[i], q, static_cast<ServerId>(i), now);
    emu[i].on_message(msg.queue_length);
    ++log.messages;
    ++log.per_server_messages[i];
    if (cfg.record_message_times) log.per_server_message_times[i].push_back(now);
    if (log.collect_trace)
      log.trace.push_back({now, 'm', static_cast<ServerId>(i), msg.queue_length});
    reschedule_emudep(i, now);
  };

  auto sample_boundary = [&](double now) {
    std::uint64_t aq = 0;
    std::uint64_t qmin = ~0ULL, qmax = 0;
    for (std::uint32_t i = 0; i < K; ++i) {
      const std::uint64_t q = servers[i].fifo.size();
      qmin = std::min(qmin, q);
      qmax = std::max(qmax, q);
      if (q != servers[i].arrivals - servers[i].departures) log.bump("flow_conservation");
      if (estimator) {
        const std::uint64_t ae = approximation_error(q, emu[i]);
        aq = std::max(aq, ae);
        const std::uint64_t d_since = comm_state[i].departures_since_message;
        const std::uint64_t d_emu = emu[i].emulated_departures();
        const std::uint64_t miscount = d_since > d_emu ? d_since - d_emu : d_emu - d_since;
        if (ae != miscount) log.bump("ae_identity");
        if (cfg.approx.kind == ApproxKind::basic && emu[i].estimate() < q)
          log.bump("basic_underestimate");
        if (bounded_error && ae > cfg.comm.x - 1) log.bump("error_bound");
        if (cfg.comm.kind == CommKind::et &&
            !mirror_signature_equal(comm_state[i].mirror, emu[i]))
          log.bump("mirror_divergence");
        if (cfg.comm.kind == CommKind::dt &&
            log.per_server_messages[i] != servers[i].departures / cfg.comm.x)
          log.bump("dt_message_count");
        if (cfg.comm.kind == CommKind::et && cfg.approx.kind != ApproxKind::basic) {
          const double bound = (static_cast<double>(servers[i].departures) +
                                servers[i].mu * job_rate_scale * now) /
                               static_cast<double>(cfg.comm.x);
          if (static_cast<double>(log.per_server_messages[i]) > bound + 1e-9)
            log.bump("et_message_bound");
        }
      }
    }
    if (estimator) {
      ++log.ae_hist[aq];
      log.sup_aq = std::max(log.sup_aq, aq);
    }
    log.sup_queue_spread =
        std::max(log.sup_queue_spread, static_cast<double>(qmax - qmin));

    if (cfg.coupled) {
      double sum = 0.0;
      for (const auto& s : servers) sum += s.workload(now);
      const double rw = ref.workload(now);
      const double gap = sum - rw;
      // Relative guard absorbs non-associative float summation only.
      if (gap < -1e-9 * std::max(1.0, rw)) log.bump("workload_dominance");
      if (!gap_seen) {
        log.gap_min = log.gap_max = gap;
        gap_seen = true;
      } else {
        log.gap_min = std::min(log.gap_min, gap);
        log.gap_max = std::max(log.gap_max, gap);
      }
      if (cfg.workload_stride > 0 &&
          ++workload_sample_counter % cfg.workload_stride == 0) {
        log.workload_sample_times.push_back(now);
        log.workload_sum_samples.push_back(sum);
        log.workload_ref_samples.push_back(rw);
      }
    }
  };

  sample_boundary(0.0);

  while (!heap.empty()) {
    const Ev ev = heap.top();
    heap.pop();
    log.queue_time_integral += static_cast<double>(q_total) * (ev.time - integral_clock);
    integral_clock = ev.time;

    switch (ev.kind) {
      case kService: {
        if (ev.server == K) {
          // Coupled reference server: departures only reshape its workload.
          const double done = ref.pop(ev.time);
          if (done >= 0.0 && done <= T) heap.push({done, kService, K, 0});
          break;
        }
        EventServer& s = servers[ev.server];
        const QueuedJob head = s.fifo.front();
        const double done = s.pop(ev.time);
        if (done >= 0.0 && done <= T) heap.push({done, kService, ev.server, 0});
        --q_total;
        ++log.departures;
        ++log.per_server_departures[ev.server];
        if (head.arrival_time < s.last_departed_arrival) log.bump("fifo_order");
        s.last_departed_arrival = head.arrival_time;
        log.jct.push_back(ev.time - head.arrival_time);
        log.jct_arrival_index.push_back(head.id);
        if (cfg.policy.charges_message_per_departure()) {
          ++log.messages;
          ++log.per_server_messages[ev.server];
        }
        if (estimator) {
          ++comm_state[ev.server].departures_since_message;
          if (cfg.comm.kind != CommKind::rt) heap.push({ev.time, kComm, ev.server, 0});
        }
        if (log.collect_trace)
          log.trace.push_back({ev.time, 'd', static_cast<ServerId>(ev.server), head.id});
        break;
      }
      case kEmuDeparture: {
        if (ev.gen != emu_gen[ev.server]) break;  // invalidated by a message
        emu[ev.server].complete_head();
        if (mirrored) comm_state[ev.server].mirror.complete_head();
        // The next emulated job, if any and finite, starts service now.
        const double head = emu[ev.server].head_remaining();
        if (head != kNeverDeparts) {
          const double when = ev.time + head / servers[ev.server].mu;
          if (when <= T) heap.push({when, kEmuDeparture, ev.server, ev.gen});
        }
        if (cfg.comm.kind == CommKind::et) heap.push({ev.time, kComm, ev.server, 0});
        break;
      }
      case kComm: {
        if (cfg.comm.kind == CommKind::rt) {
          emit(ev.server, ev.time);
          const double next =
              static_cast<double>(++rt_timer_index[ev.server]) / cfg.comm.rate;
          if (next <= T) heap.push({next, kComm, ev.server, 0});
        } else {
          const std::uint64_t q = servers[ev.server].fifo.size();
          if (should_message(cfg.comm, comm_state[ev.server], q, ev.time))
            emit(ev.server, ev.time);
        }
        break;
      }
      case kArrival: {
        const JobId id = next_id++;
        const double req = in.requirement_of(id);
        ++log.arrivals;
        digest.add_double(ev.time);
        digest.add_double(req);
        if (cfg.policy.uses_estimates())
          for (std::uint32_t i = 0; i < K; ++i) view[i] = emu[i].estimate();
        else
          for (std::uint32_t i = 0; i < K; ++i) view[i] = servers[i].fifo.size();
        const ServerId dest = route(cfg.policy, view, router);
        const double done = servers[dest].push({id, req, ev.time}, ev.time);
        if (done >= 0.0 && done <= T) heap.push({done, kService, dest, 0});
        ++q_total;
        ++servers[dest].arrivals;
        ++log.per_server_arrivals[dest];
        if (estimator) {
          const bool emu_was_empty = emu[dest].estimate() == 0;
          emu[dest].on_routed_arrival();
          if (mirrored) comm_state[dest].mirror.on_routed_arrival();
          if (emu_was_empty) {
            // The emulated server was idle; its new head starts now.
            const double head = emu[dest].head_remaining();
            if (head != kNeverDeparts) {
              const double when = ev.time + head / servers[dest].mu;
              if (when <= T) heap.push({when, kEmuDeparture, dest, emu_gen[dest]});
            }
          }
        }
        if (cfg.coupled) {
          const double rdone = ref.push({id, req, ev.time}, ev.time);
          if (rdone >= 0.0 && rdone <= T) heap.push({rdone, kService, K, 0});
        }
        if (log.collect_trace) log.trace.push_back({ev.time, 'a', dest, id});
        const double next = arrivals_seq.next();
        if (next <= T) heap.push({next, kArrival, 0, 0});
        break;
      }
    }

    if (heap.empty() || heap.top().time != ev.time) sample_boundary(ev.time);
  }

  if (integral_clock < T)
    log.queue_time_integral += static_cast<double>(q_total) * (T - integral_clock);
  sample_boundary(T);
  log.stream_digest = digest.value();
  return log;
}

}  // namespace sparselb
