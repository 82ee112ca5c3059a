#include "sparselb/experiment.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace sparselb {

namespace {

using nlohmann::json;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

[[noreturn]] void bad_key(const std::string& origin, const std::string& where,
                          const std::string& what) {
  throw SpecError(origin + ": " + where + ": " + what);
}

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& origin, const std::string& where) {
  if (!j.is_object()) bad_key(origin, where, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (allowed.find(it.key()) == allowed.end())
      bad_key(origin, where, "unknown key '" + it.key() + "'");
}

EngineKind parse_engine(const std::string& s, const std::string& origin) {
  if (s == "slot") return EngineKind::slot;
  if (s == "event") return EngineKind::event;
  bad_key(origin, "engine", "unknown engine '" + s + "' (slot|event)");
}

PolicyKind parse_policy(const std::string& s, const std::string& origin) {
  if (s == "jsq") return PolicyKind::jsq;
  if (s == "jsaq") return PolicyKind::jsaq;
  if (s == "sqd") return PolicyKind::sqd;
  if (s == "round_robin") return PolicyKind::round_robin;
  if (s == "random") return PolicyKind::random_uniform;
  bad_key(origin, "policy",
          "unknown policy '" + s + "' (jsq|jsaq|sqd|round_robin|random)");
}

CommKind parse_comm(const std::string& s, const std::string& origin) {
  if (s == "none") return CommKind::none;
  if (s == "rt") return CommKind::rt;
  if (s == "dt") return CommKind::dt;
  if (s == "et") return CommKind::et;
  bad_key(origin, "comm", "unknown pattern '" + s + "' (none|rt|dt|et)");
}

ApproxKind parse_algo(const std::string& s, const std::string& origin) {
  if (s == "basic") return ApproxKind::basic;
  if (s == "msr") return ApproxKind::msr;
  if (s == "msrx") return ApproxKind::msrx;
  bad_key(origin, "algo", "unknown algorithm '" + s + "' (basic|msr|msrx)");
}

TieBreak parse_tie(const std::string& s, const std::string& origin) {
  if (s == "random") return TieBreak::random;
  if (s == "lowest_index") return TieBreak::lowest_index;
  bad_key(origin, "tie_break", "unknown rule '" + s + "' (random|lowest_index)");
}

ServiceLaw parse_law(const std::string& s, const std::string& origin) {
  if (s == "geometric") return ServiceLaw::geometric;
  if (s == "deterministic") return ServiceLaw::deterministic;
  if (s == "exponential") return ServiceLaw::exponential;
  if (s == "bounded_uniform") return ServiceLaw::bounded_uniform;
  bad_key(origin, "service.law",
          "unknown law '" + s + "' (geometric|deterministic|exponential|bounded_uniform)");
}

GapLaw parse_gap(const std::string& s, const std::string& origin) {
  if (s == "exponential") return GapLaw::exponential;
  if (s == "deterministic") return GapLaw::deterministic;
  if (s == "uniform") return GapLaw::uniform_half_width;
  bad_key(origin, "gap_law", "unknown law '" + s + "' (exponential|deterministic|uniform)");
}

std::string comm_name(CommKind k) {
  switch (k) {
    case CommKind::none: return "none";
    case CommKind::rt: return "rt";
    case CommKind::dt: return "dt";
    case CommKind::et: return "et";
  }
  return "?";
}

std::string algo_name(ApproxKind k) {
  switch (k) {
    case ApproxKind::basic: return "basic";
    case ApproxKind::msr: return "msr";
    case ApproxKind::msrx: return "msrx";
  }
  return "?";
}

std::string default_label(const PolicyBundle& b) {
  if (b.comm == CommKind::none) {
    switch (b.policy.kind) {
      case PolicyKind::jsq: return "jsq";
      case PolicyKind::sqd: return "sq" + std::to_string(b.policy.d);
      case PolicyKind::round_robin: return "rr";
      case PolicyKind::random_uniform: return "rand";
      default: return to_string(b.policy.kind);
    }
  }
  const std::string tail = comm_name(b.comm) + "-" + algo_name(b.algo);
  return b.policy.kind == PolicyKind::jsaq ? tail : to_string(b.policy.kind) + "-" + tail;
}

PolicyBundle parse_bundle(const json& j, const std::string& origin, std::size_t index) {
  const std::string where = "bundles[" + std::to_string(index) + "]";
  check_keys(j, {"policy", "comm", "algo", "d", "tie_break", "label"}, origin, where);
  PolicyBundle b;
  if (!j.contains("policy")) bad_key(origin, where, "missing 'policy'");
  b.policy.kind = parse_policy(j.at("policy").get<std::string>(), origin);
  if (j.contains("d")) b.policy.d = j.at("d").get<std::uint32_t>();
  if (j.contains("tie_break"))
    b.policy.tie_break = parse_tie(j.at("tie_break").get<std::string>(), origin);
  if (j.contains("comm")) b.comm = parse_comm(j.at("comm").get<std::string>(), origin);
  if (j.contains("algo")) b.algo = parse_algo(j.at("algo").get<std::string>(), origin);
  b.label = j.value("label", default_label(b));
  return b;
}

// Canonical one-line rendering of a resolved cell; its hash is the config
// digest, so any change to an input that shapes the run changes the column.
std::string canonical_config(const Cell& cell, const ExperimentSpec& spec) {
  std::ostringstream os;
  const EnvConfig& e = cell.env;
  os << cell.label << '|' << (e.engine == EngineKind::slot ? "slot" : "event") << '|'
     << e.servers << '|' << format_g9(e.horizon) << '|' << format_g9(e.lambda);
  for (const auto& piece : e.rate_profile)
    os << '|' << format_g9(piece.start) << ':' << format_g9(piece.rate);
  os << '|' << static_cast<int>(e.gap_law) << '|' << static_cast<int>(e.service.law)
     << ':' << format_g9(e.service.mean) << ':' << format_g9(e.service.lo) << ':'
     << format_g9(e.service.hi);
  for (double m : e.mu) os << '|' << format_g9(m);
  os << '|' << to_string(e.policy.kind) << ':' << e.policy.d << ':'
     << static_cast<int>(e.policy.tie_break) << '|' << comm_name(e.comm.kind) << ':'
     << e.comm.x << ':' << format_g9(e.comm.rate) << '|' << algo_name(e.approx.kind)
     << '|' << e.seed << '|' << e.initial_backlog << '|' << (e.coupled ? 1 : 0) << '|'
     << format_g9(spec.warmup_fraction);
  return os.str();
}

}  // namespace

void ExperimentSpec::validate() const {
  if (servers < 1) throw SpecError(name + ": need at least one server");
  if (!(horizon > 0.0)) throw SpecError(name + ": horizon must be positive");
  if (replications < 1) throw SpecError(name + ": need at least one replication");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0))
    throw SpecError(name + ": warmup_fraction must lie in [0,1)");
  if (bundles.empty()) throw SpecError(name + ": need at least one bundle");
  if (loads.empty()) throw SpecError(name + ": need at least one load");

  for (double load : loads) {
    if (!(load > 0.0)) throw SpecError(name + ": loads must be positive");
    if (engine == EngineKind::slot && load > 1.0)
      throw SpecError(name + ": slot engine loads are per-slot probabilities <= 1");
  }
  if (!mu.empty() && mu.size() != servers)
    throw SpecError(name + ": mu must be empty or one rate per server");

  bool any_swept = false;
  std::set<std::string> labels;
  for (const auto& b : bundles) {
    b.policy.validate(servers);
    if (b.policy.uses_estimates() && b.comm == CommKind::none)
      throw SpecError(name + ": bundle '" + b.label +
                      "' routes on estimates but has no communication pattern");
    any_swept = any_swept || b.swept_over_x();
    if (!labels.insert(b.label).second)
      throw SpecError(name + ": duplicate bundle label '" + b.label + "'");
  }
  if (any_swept) {
    if (x_values.empty())
      throw SpecError(name + ": bundles with communication need x_values");
    for (std::uint32_t x : x_values)
      if (x < 1) throw SpecError(name + ": x_values must be >= 1");
  }
  if (rt_rate < 0.0) throw SpecError(name + ": rt_rate must be nonnegative");
}

ExperimentSpec parse_experiment(const std::string& json_text, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SpecError(origin + ": " + e.what());
  }
  try {
    check_keys(j,
               {"name", "engine", "servers", "horizon", "seed", "loads", "x_values",
                "bundles", "service", "mu", "gap_law", "replications",
                "warmup_fraction", "rt_rate", "coupled", "trace", "ccdf",
                "workload_stride"},
               origin, "top level");
    ExperimentSpec spec;
    spec.name = j.value("name", spec.name);
    if (j.contains("engine"))
      spec.engine = parse_engine(j.at("engine").get<std::string>(), origin);
    spec.servers = j.value("servers", spec.servers);
    spec.horizon = j.value("horizon", spec.horizon);
    spec.seed = j.value("seed", spec.seed);
    if (j.contains("loads")) spec.loads = j.at("loads").get<std::vector<double>>();
    if (j.contains("x_values"))
      spec.x_values = j.at("x_values").get<std::vector<std::uint32_t>>();
    if (j.contains("service")) {
      const json& s = j.at("service");
      check_keys(s, {"law", "mean", "lo", "hi"}, origin, "service");
      if (s.contains("law"))
        spec.service.law = parse_law(s.at("law").get<std::string>(), origin);
      spec.service.mean = s.value("mean", spec.service.mean);
      spec.service.lo = s.value("lo", spec.service.lo);
      spec.service.hi = s.value("hi", spec.service.hi);
    }
    if (j.contains("mu")) spec.mu = j.at("mu").get<std::vector<double>>();
    if (j.contains("gap_law"))
      spec.gap_law = parse_gap(j.at("gap_law").get<std::string>(), origin);
    spec.replications = j.value("replications", spec.replications);
    spec.warmup_fraction = j.value("warmup_fraction", spec.warmup_fraction);
    spec.rt_rate = j.value("rt_rate", spec.rt_rate);
    spec.coupled = j.value("coupled", spec.coupled);
    spec.trace = j.value("trace", spec.trace);
    spec.ccdf = j.value("ccdf", spec.ccdf);
    spec.workload_stride = j.value("workload_stride", spec.workload_stride);
    if (!j.contains("bundles")) bad_key(origin, "top level", "missing 'bundles'");
    const json& bs = j.at("bundles");
    if (!bs.is_array()) bad_key(origin, "bundles", "expected an array");
    for (std::size_t i = 0; i < bs.size(); ++i)
      spec.bundles.push_back(parse_bundle(bs[i], origin, i));
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw SpecError(origin + ": " + e.what());
  }
}

ExperimentSpec load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError(path + ": cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment(buf.str(), path);
}

ScalingConfig parse_scaling(const std::string& json_text, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SpecError(origin + ": " + e.what());
  }
  try {
    check_keys(j,
               {"n_values", "servers", "mu_bar", "lambda_bar", "horizon",
                "replications", "x", "service", "seed", "threads"},
               origin, "top level");
    ScalingConfig cfg;
    if (j.contains("n_values"))
      cfg.n_values = j.at("n_values").get<std::vector<std::uint64_t>>();
    cfg.servers = j.value("servers", cfg.servers);
    if (j.contains("mu_bar")) cfg.mu_bar = j.at("mu_bar").get<std::vector<double>>();
    if (j.contains("lambda_bar")) {
      cfg.lambda_bar.clear();
      for (const auto& piece : j.at("lambda_bar")) {
        check_keys(piece, {"start", "rate"}, origin, "lambda_bar piece");
        cfg.lambda_bar.push_back(
            {piece.value("start", 0.0), piece.at("rate").get<double>()});
      }
    }
    cfg.horizon = j.value("horizon", cfg.horizon);
    cfg.replications = j.value("replications", cfg.replications);
    cfg.x = j.value("x", cfg.x);
    if (j.contains("service")) {
      const json& s = j.at("service");
      check_keys(s, {"law", "mean", "lo", "hi"}, origin, "service");
      if (s.contains("law"))
        cfg.service.law = parse_law(s.at("law").get<std::string>(), origin);
      cfg.service.mean = s.value("mean", cfg.service.mean);
      cfg.service.lo = s.value("lo", cfg.service.lo);
      cfg.service.hi = s.value("hi", cfg.service.hi);
    }
    cfg.seed = j.value("seed", cfg.seed);
    cfg.threads = j.value("threads", cfg.threads);
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw SpecError(origin + ": " + e.what());
    }
    return cfg;
  } catch (const json::exception& e) {
    throw SpecError(origin + ": " + e.what());
  }
}

ScalingConfig load_scaling(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError(path + ": cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scaling(buf.str(), path);
}

std::vector<Cell> expand_cells(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<Cell> cells;
  for (const auto& bundle : spec.bundles) {
    const std::vector<std::uint32_t> xs =
        bundle.swept_over_x() ? spec.x_values : std::vector<std::uint32_t>{0};
    for (std::uint32_t x : xs)
      for (double load : spec.loads)
        for (std::uint32_t rep = 0; rep < spec.replications; ++rep) {
          Cell cell;
          cell.bundle = bundle;
          cell.x = x;
          cell.load = load;
          cell.replication = rep;

          EnvConfig& e = cell.env;
          e.engine = spec.engine;
          e.servers = spec.servers;
          e.horizon = spec.horizon;
          e.service = spec.service;
          e.gap_law = spec.gap_law;
          e.mu = spec.mu;
          e.seed = derive_seed(spec.seed, std::bit_cast<std::uint64_t>(load), rep);
          e.policy = bundle.policy;
          e.coupled = spec.coupled;
          e.workload_stride = spec.workload_stride;
          e.collect_trace = spec.trace;

          double lambda;
          if (spec.engine == EngineKind::slot) {
            lambda = load;
            e.lambda = lambda;
          } else {
            lambda = load * e.total_mu() / spec.service.mean_nominal();
            e.rate_profile = {{0.0, lambda}};
          }
          e.comm.kind = bundle.comm;
          if (bundle.comm == CommKind::rt) {
            e.comm.rate = spec.rt_rate > 0.0
                              ? spec.rt_rate
                              : lambda / (static_cast<double>(spec.servers) * x);
          } else if (bundle.comm != CommKind::none) {
            e.comm.x = x;
          }
          e.approx.kind = bundle.algo;
          if (bundle.algo == ApproxKind::msrx) e.approx.x = x;

          std::string label = bundle.label;
          if (bundle.swept_over_x()) label += "_x" + std::to_string(x);
          label += "_load" + format_g9(load) + "_rep" + std::to_string(rep);
          cell.label = label;
          cells.push_back(std::move(cell));
        }
  }
  return cells;
}

CellOutput run_cell(const ExperimentSpec& spec, const Cell& cell) {
  const MetricsLog log = run(cell.env);

  if (log.total_violations() != 0) {
    std::ostringstream os;
    os << cell.label << ": invariant violations:";
    for (const auto& [key, count] : log.violations)
      if (count) os << ' ' << key << '=' << count;
    throw std::runtime_error(os.str());
  }
  // Baselines are charged exactly one message per departure (or none).
  if (cell.bundle.comm == CommKind::none) {
    const bool charged = cell.env.policy.charges_message_per_departure();
    if (log.messages != (charged ? log.departures : 0))
      throw std::runtime_error(cell.label + ": baseline accounting drifted");
  }

  CellOutput out;
  RunRow& r = out.row;
  r.cell = cell.label;
  r.engine = spec.engine == EngineKind::slot ? "slot" : "event";
  r.policy = to_string(cell.env.policy.kind);
  r.comm = comm_name(cell.bundle.comm);
  r.algo = cell.bundle.comm == CommKind::none ? "none" : algo_name(cell.bundle.algo);
  r.x = cell.x;
  r.rt_rate = cell.bundle.comm == CommKind::rt ? cell.env.comm.rate : 0.0;
  r.load = cell.load;
  r.replication = cell.replication;
  r.seed = cell.env.seed;
  r.arrivals = log.arrivals;
  r.departures = log.departures;
  r.messages = log.messages;
  const auto rc = relative_communication(log.messages, log.departures);
  r.relative_comm = rc ? *rc : std::nan("");
  r.sup_aq = log.sup_aq;

  std::vector<double> kept = jct_after_warmup(log, spec.warmup_fraction);
  if (kept.empty()) {
    r.jct_mean = r.jct_median = r.jct_p99 = std::nan("");
  } else {
    if (spec.ccdf) out.jct_ccdf = make_ccdf(kept);
    const SummaryStats st = summarize(std::move(kept));
    r.jct_mean = st.mean;
    r.jct_median = st.median;
    r.jct_p99 = st.p99;
  }
  r.mean_queue = log.queue_time_integral / log.horizon;
  r.violations = log.total_violations();
  r.stream_digest = hex_u64(log.stream_digest);
  r.config_digest = hex_u64(fnv1a(canonical_config(cell, spec)));
  out.trace = log.trace;
  return out;
}

std::vector<CellOutput> run_cells(const ExperimentSpec& spec,
                                  const std::vector<Cell>& cells,
                                  std::uint32_t threads, std::ostream* progress) {
  std::vector<CellOutput> outputs(cells.size());
  std::mutex io_mu;
  std::atomic<std::size_t> cursor{0};
  std::atomic<std::size_t> done{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&] {
    while (true) {
      const std::size_t k = cursor.fetch_add(1);
      if (k >= cells.size()) return;
      try {
        outputs[k] = run_cell(spec, cells[k]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        cursor.store(cells.size());
        return;
      }
      const std::size_t n = done.fetch_add(1) + 1;
      if (progress) {
        std::lock_guard<std::mutex> lock(io_mu);
        *progress << "[" << n << "/" << cells.size() << "] " << cells[k].label << "\n";
      }
    }
  };

  const std::uint32_t workers = std::max<std::uint32_t>(
      1, std::min<std::uint32_t>(threads, static_cast<std::uint32_t>(cells.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::uint32_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  // Every policy at a fixed (load, replication) must have replayed the same
  // arrivals and requirements.
  std::map<std::pair<std::uint64_t, std::uint32_t>, std::string> digests;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const auto key = std::make_pair(std::bit_cast<std::uint64_t>(cells[k].load),
                                    cells[k].replication);
    auto [it, fresh] = digests.emplace(key, outputs[k].row.stream_digest);
    if (!fresh && it->second != outputs[k].row.stream_digest)
      throw std::runtime_error(cells[k].label +
                               ": input stream digest differs across policies");
  }
  return outputs;
}

std::string format_g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string hex_u64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_summary_csv(std::ostream& os, const std::vector<RunRow>& rows) {
  os << "cell,engine,policy,comm,algo,x,rt_rate,load,replication,seed,arrivals,"
        "departures,messages,relative_comm,sup_aq,jct_mean,jct_median,jct_p99,"
        "mean_queue,violations,stream_digest,config_digest\n";
  for (const auto& r : rows) {
    os << r.cell << ',' << r.engine << ',' << r.policy << ',' << r.comm << ','
       << r.algo << ',' << r.x << ',' << format_g9(r.rt_rate) << ','
       << format_g9(r.load) << ',' << r.replication << ',' << r.seed << ','
       << r.arrivals << ',' << r.departures << ',' << r.messages << ','
       << format_g9(r.relative_comm) << ',' << r.sup_aq << ','
       << format_g9(r.jct_mean) << ',' << format_g9(r.jct_median) << ','
       << format_g9(r.jct_p99) << ',' << format_g9(r.mean_queue) << ','
       << r.violations << ',' << r.stream_digest << ',' << r.config_digest << '\n';
  }
}

void write_ccdf_csv(std::ostream& os, const CcdfCurve& curve) {
  os << "value,tail_prob\n";
  for (std::size_t i = 0; i < curve.values.size(); ++i)
    os << format_g9(curve.values[i]) << ',' << format_g9(curve.tail[i]) << '\n';
}

void write_trace_jsonl(std::ostream& os,
                       const std::vector<MetricsLog::TraceEvent>& trace) {
  for (const auto& ev : trace)
    os << "{\"time\":" << format_g9(ev.time) << ",\"kind\":\"" << ev.kind
       << "\",\"server\":" << ev.server << ",\"payload\":" << ev.payload << "}\n";
}

void write_exit_times_csv(std::ostream& os, const std::vector<ExitTimeResult>& rows) {
  os << "mu,y,trials,tracking_mean,tracking_ci,tracking_bound,deviation_mean,"
        "deviation_ci,deviation_bound\n";
  for (const auto& r : rows)
    os << format_g9(r.mu) << ',' << r.y << ',' << r.trials << ','
       << format_g9(r.tracking.mean) << ',' << format_g9(r.tracking.ci_halfwidth)
       << ',' << format_g9(r.tracking_bound) << ',' << format_g9(r.deviation.mean)
       << ',' << format_g9(r.deviation.ci_halfwidth) << ','
       << format_g9(r.deviation_bound) << '\n';
}

void write_scaling_csv(std::ostream& os, const ScalingResult& result) {
  os << "n,replications,spread_median,workload_median\n";
  for (const auto& p : result.points)
    os << p.n << ',' << p.replications << ',' << format_g9(p.spread_median) << ','
       << format_g9(p.workload_median) << '\n';
}

void require_fresh(const std::string& path, bool force) {
  if (!force && std::filesystem::exists(path))
    throw CollisionError(path + ": already exists; pass --force to overwrite");
}

}  // namespace sparselb
