#include "manetsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace manetsim {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double parse_double(const std::string& v, int line) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ScenarioParseError(line, "expected a number, got '" + v + "'");
  }
}

long long parse_int(const std::string& v, int line) {
  try {
    std::size_t pos = 0;
    long long i = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ScenarioParseError(line, "expected an integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, int line) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ScenarioParseError(line, "expected a boolean, got '" + v + "'");
}

std::vector<int> parse_route_nodes(const std::string& v, int line) {
  std::vector<int> nodes;
  for (const auto& tok : tokenize(v)) {
    nodes.push_back(static_cast<int>(parse_int(tok, line)));
  }
  if (nodes.size() < 2) throw ScenarioParseError(line, "route needs at least two nodes");
  return nodes;
}

std::string join_algorithms() {
  std::string s;
  for (const auto& id : known_algorithm_ids()) {
    if (!s.empty()) s += ", ";
    s += id;
  }
  return s;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

Scenario parse_scenario(std::istream& in) {
  Scenario sc;
  std::string section;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string text = raw;
    const auto hash = text.find('#');
    if (hash != std::string::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;

    if (text.front() == '[') {
      if (text.back() != ']') throw ScenarioParseError(line, "unterminated section header");
      section = trim(text.substr(1, text.size() - 2));
      if (section != "scenario" && section != "network" && section != "flows" &&
          section != "script" && section != "params" && section != "sweep") {
        throw ScenarioParseError(line, "unknown section [" + section + "]");
      }
      continue;
    }

    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ScenarioParseError(line, "expected key = value");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (section.empty()) throw ScenarioParseError(line, "key outside of any [section]");

    if (section == "scenario") {
      if (key == "name") {
        sc.name = value;
      } else if (key == "duration") {
        sc.duration = parse_double(value, line);
        if (!(sc.duration > 0.0)) throw ScenarioParseError(line, "duration must be positive");
      } else if (key == "seeds") {
        sc.seeds.clear();
        for (const auto& tok : tokenize(value)) {
          sc.seeds.push_back(static_cast<std::uint64_t>(parse_int(tok, line)));
        }
        if (sc.seeds.empty()) throw ScenarioParseError(line, "seeds list is empty");
      } else if (key == "algorithms") {
        sc.algorithms.clear();
        const auto ids = known_algorithm_ids();
        for (const auto& tok : tokenize(value)) {
          if (std::find(ids.begin(), ids.end(), tok) == ids.end()) {
            throw ScenarioParseError(line, "unknown algorithm '" + tok +
                                               "' (valid: " + join_algorithms() + ")");
          }
          sc.algorithms.push_back(tok);
        }
      } else {
        throw ScenarioParseError(line, "unknown key '" + key + "' in [scenario]");
      }
    } else if (section == "network") {
      if (key == "topology") {
        if (value != "chain" && value != "mobile") {
          throw ScenarioParseError(line, "topology must be 'chain' or 'mobile'");
        }
        sc.topology = value;
      } else if (key == "n_hops") {
        sc.n_hops = static_cast<int>(parse_int(value, line));
        if (sc.n_hops < 1) throw ScenarioParseError(line, "n_hops must be >= 1");
      } else if (key == "routes") {
        sc.routes.clear();
        for (const auto& part : split(value, '|')) {
          sc.routes.push_back(parse_route_nodes(part, line));
        }
      } else if (key == "bandwidth_bps") {
        sc.link.bandwidth_bps = parse_double(value, line);
        if (!(sc.link.bandwidth_bps > 0.0)) throw ScenarioParseError(line, "bandwidth must be positive");
      } else if (key == "propagation_delay") {
        sc.link.propagation_delay = parse_double(value, line);
        if (sc.link.propagation_delay < 0.0) throw ScenarioParseError(line, "delay must be >= 0");
      } else if (key == "packet_error_rate") {
        sc.link.packet_error_rate = parse_double(value, line);
        if (sc.link.packet_error_rate < 0.0 || sc.link.packet_error_rate > 1.0) {
          throw ScenarioParseError(line, "packet_error_rate must be in [0,1]");
        }
      } else if (key == "queue_capacity_bytes") {
        sc.queue_capacity_bytes = static_cast<int>(parse_int(value, line));
        if (sc.queue_capacity_bytes <= 0) throw ScenarioParseError(line, "queue capacity must be positive");
      } else if (key == "packet_size_bytes") {
        sc.packet_size_bytes = static_cast<int>(parse_int(value, line));
        if (sc.packet_size_bytes <= 0) throw ScenarioParseError(line, "packet size must be positive");
      } else if (key == "ack_size_bytes") {
        sc.ack_size_bytes = static_cast<int>(parse_int(value, line));
        if (sc.ack_size_bytes <= 0) throw ScenarioParseError(line, "ack size must be positive");
      } else if (key == "initial_ttl") {
        sc.initial_ttl = static_cast<int>(parse_int(value, line));
        if (sc.initial_ttl < 1) throw ScenarioParseError(line, "initial_ttl must be >= 1");
      } else if (key == "receiver_clock_offset") {
        sc.receiver_clock_offset = parse_double(value, line);
      } else if (key == "delayed_ack") {
        sc.delayed_ack = parse_bool(value, line);
      } else {
        throw ScenarioParseError(line, "unknown key '" + key + "' in [network]");
      }
    } else if (section == "flows") {
      if (key == "count") {
        sc.flow_count = static_cast<int>(parse_int(value, line));
        if (sc.flow_count < 1) throw ScenarioParseError(line, "flow count must be >= 1");
      } else if (key == "stagger") {
        sc.flow_stagger = parse_double(value, line);
        if (sc.flow_stagger < 0.0) throw ScenarioParseError(line, "stagger must be >= 0");
      } else {
        throw ScenarioParseError(line, "unknown key '" + key + "' in [flows]");
      }
    } else if (section == "script") {
      if (key == "event") {
        auto toks = tokenize(value);
        if (toks.empty()) throw ScenarioParseError(line, "empty script event");
        ScriptEventSpec ev;
        if (toks[0] == "break") {
          if (toks.size() != 2) throw ScenarioParseError(line, "usage: event = break <time>");
          ev.is_break = true;
          ev.time = parse_double(toks[1], line);
        } else if (toks[0] == "restore") {
          if (toks.size() < 4) {
            throw ScenarioParseError(line, "usage: event = restore <time> <node> <node> ...");
          }
          ev.is_break = false;
          ev.time = parse_double(toks[1], line);
          for (std::size_t i = 2; i < toks.size(); ++i) {
            ev.route.push_back(static_cast<int>(parse_int(toks[i], line)));
          }
        } else {
          throw ScenarioParseError(line, "script event must start with 'break' or 'restore'");
        }
        sc.script_events.push_back(std::move(ev));
      } else if (key == "outages_per_min") {
        sc.outages_per_min = parse_double(value, line);
        if (sc.outages_per_min < 0.0) throw ScenarioParseError(line, "outages_per_min must be >= 0");
      } else if (key == "outage_duration") {
        sc.outage_duration = parse_double(value, line);
        if (!(sc.outage_duration > 0.0)) throw ScenarioParseError(line, "outage_duration must be positive");
      } else if (key == "first_outage") {
        sc.first_outage = parse_double(value, line);
        if (sc.first_outage < 0.0) throw ScenarioParseError(line, "first_outage must be >= 0");
      } else if (key == "outage_jitter") {
        sc.outage_jitter = parse_double(value, line);
        if (sc.outage_jitter < 0.0 || sc.outage_jitter >= 1.0) {
          throw ScenarioParseError(line, "outage_jitter must be in [0,1)");
        }
      } else {
        throw ScenarioParseError(line, "unknown key '" + key + "' in [script]");
      }
    } else if (section == "params") {
      if (key == "alpha_ack") {
        sc.queue_usage.alpha_ack = parse_double(value, line);
      } else if (key == "alpha_timeout") {
        sc.queue_usage.alpha_timeout = parse_double(value, line);
      } else if (key == "threshold") {
        sc.queue_usage.threshold = parse_double(value, line);
      } else if (key == "erott_gain") {
        sc.erott_gain = parse_double(value, line);
      } else if (key == "rto_initial") {
        sc.rto_initial = parse_double(value, line);
      } else if (key == "rto_min") {
        sc.bounds.rto_min = parse_double(value, line);
      } else if (key == "rto_max") {
        sc.bounds.rto_max = parse_double(value, line);
      } else if (key == "initial_cwnd") {
        sc.initial_cwnd = parse_double(value, line);
      } else if (key == "initial_ssthresh") {
        sc.initial_ssthresh = parse_double(value, line);
      } else if (key == "welcome_window") {
        sc.welcome_window = static_cast<int>(parse_int(value, line));
      } else if (key == "welcome_ascending_k") {
        sc.welcome_ascending_k = static_cast<int>(parse_int(value, line));
      } else if (key == "freeze_rto_on_failure") {
        sc.freeze_rto_on_failure = parse_bool(value, line);
      } else {
        throw ScenarioParseError(line, "unknown key '" + key + "' in [params]");
      }
    } else if (section == "sweep") {
      if (key == "parameter") {
        if (value != "none" && value != "flows" && value != "per" && value != "speed") {
          throw ScenarioParseError(line, "sweep parameter must be none|flows|per|speed");
        }
        sc.sweep_parameter = value;
      } else if (key == "values") {
        sc.sweep_values.clear();
        for (const auto& tok : tokenize(value)) {
          sc.sweep_values.push_back(parse_double(tok, line));
        }
      } else if (key == "figure") {
        if (value != "fig8" && value != "fig9" && value != "fig10" && !value.empty()) {
          throw ScenarioParseError(line, "figure must be fig8|fig9|fig10");
        }
        sc.figure = value;
      } else {
        throw ScenarioParseError(line, "unknown key '" + key + "' in [sweep]");
      }
    }
  }

  if (sc.algorithms.empty()) sc.algorithms = known_algorithm_ids();
  validate_scenario(sc);
  return sc;
}

Scenario parse_scenario_string(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in);
}

Scenario parse_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SimError("cannot open scenario file: " + path);
  return parse_scenario(in);
}

void validate_scenario(const Scenario& sc) {
  if (!(sc.duration > 0.0)) throw SimError("scenario: duration must be positive");
  if (sc.flow_count < 1) throw SimError("scenario: flow_count must be >= 1");
  if (sc.seeds.empty()) throw SimError("scenario: seeds list is empty");
  const auto ids = known_algorithm_ids();
  for (const auto& a : sc.algorithms) {
    if (std::find(ids.begin(), ids.end(), a) == ids.end()) {
      throw SimError("scenario: unknown algorithm '" + a + "' (valid: " + join_algorithms() + ")");
    }
  }
  if (sc.topology == "mobile" && sc.routes.empty()) {
    throw SimError("scenario: mobile topology requires a routes list");
  }
  const auto& q = sc.queue_usage;
  if (!(q.alpha_ack > 0.0 && q.alpha_ack < 1.0) ||
      !(q.alpha_timeout > 0.0 && q.alpha_timeout < 1.0) ||
      !(q.threshold > 0.0 && q.threshold < 1.0)) {
    throw SimError("scenario: alphas and threshold must lie in (0,1)");
  }
  if (!(sc.erott_gain > 0.0 && sc.erott_gain <= 1.0)) {
    throw SimError("scenario: erott_gain must lie in (0,1]");
  }
  if (!(sc.bounds.rto_min > 0.0) || !(sc.bounds.rto_max > sc.bounds.rto_min)) {
    throw SimError("scenario: rto bounds must satisfy 0 < rto_min < rto_max");
  }
  if (sc.sweep_parameter != "none" && sc.sweep_values.empty()) {
    throw SimError("scenario: sweep requested without values");
  }
  if (sc.sweep_parameter == "flows") {
    for (double v : sc.sweep_values) {
      if (v < 1.0) throw SimError("scenario: flows sweep values must be >= 1");
    }
  }
  if (sc.sweep_parameter == "per") {
    for (double v : sc.sweep_values) {
      if (v < 0.0 || v > 1.0) throw SimError("scenario: per sweep values must be in [0,1]");
    }
  }
  if (sc.sweep_parameter == "speed") {
    for (double v : sc.sweep_values) {
      if (!(v > 0.0)) throw SimError("scenario: speed sweep values must be positive");
    }
  }
}

RouteScript build_script(const Scenario& sc, std::uint64_t seed) {
  RouteScript script;
  if (!sc.script_events.empty()) {
    for (const auto& ev : sc.script_events) {
      ScriptAction a;
      a.time = ev.time;
      if (ev.is_break) {
        a.kind = ScriptAction::Kind::Break;
      } else {
        a.kind = ScriptAction::Kind::Restore;
        a.route.nodes = ev.route;
      }
      script.push_back(std::move(a));
    }
    return script;
  }
  if (!(sc.outages_per_min > 0.0)) return script;

  std::vector<std::vector<int>> routes = sc.routes;
  if (routes.empty()) {
    std::vector<int> chain(sc.n_hops + 1);
    for (int i = 0; i <= sc.n_hops; ++i) chain[i] = i;
    routes.push_back(std::move(chain));
  }

  Rng rng(seed ^ 0x00C0FFEE12345678ULL);
  const double spacing = 60.0 / sc.outages_per_min;
  double t = sc.first_outage;
  double last_end = 0.0;
  std::size_t route_idx = 1;
  while (t < sc.duration) {
    const double jitter = (rng.next_uniform() * 2.0 - 1.0) * sc.outage_jitter * spacing;
    const double tb = std::max(t + jitter, last_end + 1e-3);
    const double te = tb + sc.outage_duration;
    if (te >= sc.duration) break;
    ScriptAction br;
    br.time = tb;
    br.kind = ScriptAction::Kind::Break;
    script.push_back(br);
    ScriptAction re;
    re.time = te;
    re.kind = ScriptAction::Kind::Restore;
    re.route.nodes = routes[route_idx % routes.size()];
    script.push_back(std::move(re));
    ++route_idx;
    last_end = te;
    t += spacing;
  }
  return script;
}

Simulator build_simulator(const Scenario& sc, const std::string& algorithm_id,
                          std::uint64_t seed, bool record_net_trace) {
  Topology topo;
  RouteScript script = build_script(sc, seed);
  if (sc.topology == "chain") {
    topo = build_chain(sc.n_hops, sc.link);
    topo.script = std::move(script);
    validate_script(topo);
  } else {
    Route initial;
    initial.nodes = sc.routes.at(0);
    topo = build_mobile(std::move(initial), std::move(script), sc.link);
  }

  SimConfig cfg;
  cfg.duration = sc.duration;
  cfg.seed = seed;
  cfg.packet_size_bytes = sc.packet_size_bytes;
  cfg.ack_size_bytes = sc.ack_size_bytes;
  cfg.queue_capacity_bytes = sc.queue_capacity_bytes;
  cfg.initial_ttl = sc.initial_ttl;
  cfg.receiver_clock_offset = sc.receiver_clock_offset;
  cfg.delayed_ack = sc.delayed_ack;
  cfg.flow_stagger = sc.flow_stagger;
  cfg.record_net_trace = record_net_trace;

  Simulator sim(std::move(topo), cfg);
  for (int f = 0; f < sc.flow_count; ++f) {
    SenderConfig c = make_algorithm_config(algorithm_id);
    c.classifier_params.queue_usage = sc.queue_usage;
    c.classifier_params.erott_gain = sc.erott_gain;
    c.classifier_params.welcome_window = static_cast<std::size_t>(sc.welcome_window);
    c.classifier_params.welcome_ascending_k = sc.welcome_ascending_k;
    c.rto_initial = sc.rto_initial;
    c.bounds = sc.bounds;
    c.initial_cwnd = sc.initial_cwnd;
    c.initial_ssthresh = sc.initial_ssthresh;
    if (algorithm_id == "enhanced") {
      c.freeze_rto_on_failure = sc.freeze_rto_on_failure;
    }
    sim.add_flow(std::move(c));
  }
  return sim;
}

namespace {

int cause_index(LossCause c) {
  switch (c) {
    case LossCause::Congestion: return 0;
    case LossCause::WirelessError: return 1;
    case LossCause::LinkFailure: return 2;
  }
  return 0;
}

}  // namespace

AccuracyResult compute_accuracy(const std::vector<LossEvent>& events) {
  AccuracyResult r;
  std::array<std::uint64_t, 3> truth_total{};
  std::array<std::uint64_t, 3> correct{};
  for (const auto& e : events) {
    const int t = cause_index(e.truth);
    ++truth_total[t];
    if (e.verdict) {
      ++r.confusion[t][cause_index(*e.verdict)];
      if (*e.verdict == e.truth) ++correct[t];
    } else {
      ++r.abstained[t];
    }
  }
  auto recall = [&](int t) -> std::optional<double> {
    if (truth_total[t] == 0) return std::nullopt;
    return static_cast<double>(correct[t]) / static_cast<double>(truth_total[t]);
  };
  r.ac = recall(0);
  r.aw = recall(1);
  r.al = recall(2);
  return r;
}

double compute_throughput(const std::vector<DeliveryRecord>& deliveries, double duration) {
  if (!(duration > 0.0)) throw SimError("compute_throughput: duration must be positive");
  std::set<std::pair<int, std::uint64_t>> distinct;
  for (const auto& d : deliveries) distinct.insert({d.flow, d.seq});
  return static_cast<double>(distinct.size()) / duration;
}

double compute_sum_rto(const std::vector<SenderTraceRow>& trace) {
  double sum = 0.0;
  for (const auto& row : trace) {
    if (row.event == "send" || row.event == "retransmit") sum += row.rto;
  }
  return sum;
}

namespace {

Scenario apply_sweep(Scenario sc, std::optional<double> value) {
  if (!value) return sc;
  if (sc.sweep_parameter == "flows") {
    sc.flow_count = static_cast<int>(*value);
  } else if (sc.sweep_parameter == "per") {
    sc.link.packet_error_rate = *value;
  } else if (sc.sweep_parameter == "speed") {
    // Mobility speed maps linearly onto outage frequency: one unit of
    // speed = one outage per minute.
    sc.outages_per_min = *value;
  }
  return sc;
}

}  // namespace

CellMetrics run_cell(const Scenario& sc, const std::string& algorithm_id, std::uint64_t seed,
                     std::optional<double> sweep_value) {
  const Scenario cell_sc = apply_sweep(sc, sweep_value);
  Simulator sim = build_simulator(cell_sc, algorithm_id, seed);
  sim.run();

  CellMetrics m;
  m.algorithm = algorithm_id;
  m.seed = seed;
  m.sweep_value = sweep_value;
  m.events = sim.loss_events();
  m.accuracy = compute_accuracy(m.events);
  m.throughput = compute_throughput(sim.deliveries(), cell_sc.duration);
  double sum = 0.0;
  for (int f = 0; f < sim.flow_count(); ++f) sum += sim.sender(f).sum_rto();
  m.sum_rto = sum;
  m.detected_losses = m.events.size();
  m.spurious_detections = sim.spurious_detections();
  return m;
}

MetricsReport run_batch(const Scenario& sc, unsigned jobs) {
  validate_scenario(sc);
  Scenario base = sc;
  if (base.algorithms.empty()) base.algorithms = known_algorithm_ids();

  std::vector<std::optional<double>> sweep_values;
  if (base.sweep_parameter == "none" || base.sweep_values.empty()) {
    sweep_values.push_back(std::nullopt);
  } else {
    for (double v : base.sweep_values) sweep_values.push_back(v);
  }

  struct CellSpec {
    std::optional<double> sweep_value;
    std::string algorithm;
    std::uint64_t seed;
  };
  std::vector<CellSpec> specs;
  for (const auto& sv : sweep_values) {
    for (const auto& algo : base.algorithms) {
      for (std::uint64_t seed : base.seeds) {
        specs.push_back({sv, algo, seed});
      }
    }
  }

  std::vector<CellMetrics> cells(specs.size());
  std::vector<std::exception_ptr> errors(specs.size());
  std::atomic<std::size_t> next{0};

  unsigned n_threads = jobs != 0 ? jobs : std::thread::hardware_concurrency();
  if (n_threads == 0) n_threads = 1;
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(specs.size()));
  n_threads = std::max(1u, n_threads);

  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= specs.size()) return;
      try {
        cells[i] = run_cell(base, specs[i].algorithm, specs[i].seed, specs[i].sweep_value);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (errors[i]) {
      try {
        std::rethrow_exception(errors[i]);
      } catch (const std::exception& e) {
        throw SimError("cell (" + specs[i].algorithm + ", seed " +
                       std::to_string(specs[i].seed) + ") failed: " + e.what());
      }
    }
  }

  MetricsReport report;
  report.scenario = std::move(base);
  report.cells = std::move(cells);
  return report;
}

double median(std::vector<double> values) {
  if (values.empty()) throw SimError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

bool same_sweep(const std::optional<double>& a, const std::optional<double>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a.has_value() || *a == *b;
}

}  // namespace

std::optional<double> median_accuracy(const MetricsReport& report,
                                      std::optional<double> sweep_value,
                                      const std::string& algorithm, char which) {
  std::vector<double> vals;
  for (const auto& c : report.cells) {
    if (c.algorithm != algorithm || !same_sweep(c.sweep_value, sweep_value)) continue;
    const std::optional<double>& v = which == 'c'   ? c.accuracy.ac
                                     : which == 'w' ? c.accuracy.aw
                                                    : c.accuracy.al;
    if (v) vals.push_back(*v);
  }
  if (vals.empty()) return std::nullopt;
  return median(std::move(vals));
}

double median_throughput(const MetricsReport& report, const std::string& algorithm) {
  std::vector<double> vals;
  for (const auto& c : report.cells) {
    if (c.algorithm == algorithm) vals.push_back(c.throughput);
  }
  return vals.empty() ? 0.0 : median(std::move(vals));
}

double median_sum_rto(const MetricsReport& report, const std::string& algorithm) {
  std::vector<double> vals;
  for (const auto& c : report.cells) {
    if (c.algorithm == algorithm) vals.push_back(c.sum_rto);
  }
  return vals.empty() ? 0.0 : median(std::move(vals));
}

std::string loss_event_csv_header() {
  return "algorithm,flow,seq,time,detection,q_at_decision,verdict,truth";
}

std::string loss_event_to_csv(const LossEvent& e) {
  std::string verdict = e.verdict ? to_string(*e.verdict) : "abstain";
  return e.algorithm_id + "," + std::to_string(e.flow) + "," + std::to_string(e.seq) + "," +
         format_double(e.time) + "," + to_string(e.detection) + "," +
         format_double(e.q_at_decision) + "," + verdict + "," + to_string(e.truth);
}

LossEvent loss_event_from_csv(const std::string& row) {
  const auto f = split(row, ',');
  if (f.size() != 8) throw SimError("loss event row must have 8 fields");
  LossEvent e;
  e.algorithm_id = f[0];
  e.flow = static_cast<int>(std::stoll(f[1]));
  e.seq = static_cast<std::uint64_t>(std::stoull(f[2]));
  e.time = std::stod(f[3]);
  const auto det = detection_kind_from_string(f[4]);
  if (!det) throw SimError("bad detection kind: " + f[4]);
  e.detection = *det;
  e.q_at_decision = std::stod(f[5]);
  if (f[6] == "abstain") {
    e.verdict.reset();
  } else {
    const auto v = loss_cause_from_string(f[6]);
    if (!v) throw SimError("bad verdict: " + f[6]);
    e.verdict = *v;
  }
  const auto t = loss_cause_from_string(f[7]);
  if (!t) throw SimError("bad truth: " + f[7]);
  e.truth = *t;
  return e;
}

namespace {

std::string opt_to_string(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("n/a");
}

std::string sweep_to_string(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("");
}

std::vector<std::optional<double>> report_sweep_values(const MetricsReport& r) {
  if (r.scenario.sweep_parameter == "none" || r.scenario.sweep_values.empty()) {
    return {std::nullopt};
  }
  std::vector<std::optional<double>> out;
  for (double v : r.scenario.sweep_values) out.push_back(v);
  return out;
}

}  // namespace

void emit_reports(const MetricsReport& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const auto path = [&](const char* name) { return (fs::path(out_dir) / name).string(); };

  const auto sweeps = report_sweep_values(report);
  const auto& algos = report.scenario.algorithms;

  {
    std::ofstream out(path("metrics.csv"));
    out << "sweep_value,algorithm,seed,detected_losses,spurious,ac,aw,al,"
           "throughput_pps,sum_rto_s\n";
    for (const auto& c : report.cells) {
      out << sweep_to_string(c.sweep_value) << "," << c.algorithm << "," << c.seed << ","
          << c.detected_losses << "," << c.spurious_detections << ","
          << opt_to_string(c.accuracy.ac) << "," << opt_to_string(c.accuracy.aw) << ","
          << opt_to_string(c.accuracy.al) << "," << format_double(c.throughput) << ","
          << format_double(c.sum_rto) << "\n";
    }
    // cross-seed medians per (sweep value, algorithm)
    for (const auto& sv : sweeps) {
      for (const auto& algo : algos) {
        std::vector<double> tp;
        std::vector<double> sr;
        std::uint64_t detected = 0;
        std::uint64_t spurious = 0;
        for (const auto& c : report.cells) {
          if (c.algorithm != algo || !same_sweep(c.sweep_value, sv)) continue;
          tp.push_back(c.throughput);
          sr.push_back(c.sum_rto);
          detected += c.detected_losses;
          spurious += c.spurious_detections;
        }
        if (tp.empty()) continue;
        out << sweep_to_string(sv) << "," << algo << ",median," << detected << "," << spurious
            << "," << opt_to_string(median_accuracy(report, sv, algo, 'c')) << ","
            << opt_to_string(median_accuracy(report, sv, algo, 'w')) << ","
            << opt_to_string(median_accuracy(report, sv, algo, 'l')) << ","
            << format_double(median(tp)) << "," << format_double(median(sr)) << "\n";
      }
    }
  }

  {
    std::ofstream out(path("confusion.csv"));
    out << "sweep_value,algorithm,seed,truth,congestion,wireless,link_failure,abstained\n";
    static const char* truth_names[3] = {"congestion", "wireless", "link_failure"};
    for (const auto& c : report.cells) {
      for (int t = 0; t < 3; ++t) {
        out << sweep_to_string(c.sweep_value) << "," << c.algorithm << "," << c.seed << ","
            << truth_names[t] << "," << c.accuracy.confusion[t][0] << ","
            << c.accuracy.confusion[t][1] << "," << c.accuracy.confusion[t][2] << ","
            << c.accuracy.abstained[t] << "\n";
      }
    }
  }

  {
    std::ofstream out(path("losses.csv"));
    out << "sweep_value,seed," << loss_event_csv_header() << "\n";
    for (const auto& c : report.cells) {
      for (const auto& e : c.events) {
        out << sweep_to_string(c.sweep_value) << "," << c.seed << "," << loss_event_to_csv(e)
            << "\n";
      }
    }
  }

  {
    std::ofstream out(path("fig8_accuracy_vs_flows.csv"));
    out << "flows,algorithm,ac_median\n";
    if (report.scenario.figure == "fig8") {
      for (const auto& sv : sweeps) {
        for (const auto& algo : algos) {
          out << sweep_to_string(sv) << "," << algo << ","
              << opt_to_string(median_accuracy(report, sv, algo, 'c')) << "\n";
        }
      }
    }
  }

  {
    std::ofstream out(path("fig9_accuracy_vs_per.csv"));
    out << "packet_error_rate,algorithm,aw_median\n";
    if (report.scenario.figure == "fig9") {
      for (const auto& sv : sweeps) {
        for (const auto& algo : algos) {
          out << sweep_to_string(sv) << "," << algo << ","
              << opt_to_string(median_accuracy(report, sv, algo, 'w')) << "\n";
        }
      }
    }
  }

  {
    std::ofstream out(path("fig10_accuracy_vs_speed.csv"));
    out << "speed,algorithm,al_median\n";
    if (report.scenario.figure == "fig10") {
      for (const auto& sv : sweeps) {
        for (const auto& algo : algos) {
          out << sweep_to_string(sv) << "," << algo << ","
              << opt_to_string(median_accuracy(report, sv, algo, 'l')) << "\n";
        }
      }
    }
  }

  const auto has_cells = [&](const std::string& algo) {
    return std::any_of(report.cells.begin(), report.cells.end(),
                       [&](const CellMetrics& c) { return c.algorithm == algo; });
  };

  {
    std::ofstream out(path("fig11_throughput.csv"));
    out << "algorithm,throughput_median_pps\n";
    for (const auto& algo : algos) {
      if (!has_cells(algo)) continue;
      out << algo << "," << format_double(median_throughput(report, algo)) << "\n";
    }
  }

  {
    std::ofstream out(path("fig13_sum_rto.csv"));
    out << "algorithm,sum_rto_median_s\n";
    for (const auto& algo : algos) {
      if (!has_cells(algo)) continue;
      out << algo << "," << format_double(median_sum_rto(report, algo)) << "\n";
    }
  }
}

}  // namespace manetsim
