#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "manetsim/netsim.hpp"

namespace manetsim {

struct ScriptEventSpec {
  bool is_break = true;
  double time = 0.0;
  std::vector<int> route;  // restore only
};

// Flat description of one experiment: topology, traffic, loss sources,
// scripted outages, algorithm list, parameter overrides, and an optional
// one-dimensional sweep.
struct Scenario {
  std::string name = "scenario";
  double duration = 60.0;
  std::vector<std::uint64_t> seeds = {1};
  std::vector<std::string> algorithms;  // empty -> all known

  // network
  std::string topology = "chain";  // chain | mobile
  int n_hops = 6;
  std::vector<std::vector<int>> routes;  // mobile: first entry is the initial route
  LinkParams link;
  int queue_capacity_bytes = 50000;
  int packet_size_bytes = 1000;
  int ack_size_bytes = 40;
  int initial_ttl = 64;
  double receiver_clock_offset = 0.0;
  bool delayed_ack = false;

  // flows
  int flow_count = 1;
  double flow_stagger = 1.0;

  // script: explicit events or automatic outage generation
  std::vector<ScriptEventSpec> script_events;
  double outages_per_min = 0.0;
  double outage_duration = 2.5;
  double first_outage = 10.0;
  double outage_jitter = 0.2;  // fraction of the spacing

  // classifier / sender parameters
  QueueUsageParams queue_usage;
  double erott_gain = 0.125;
  double rto_initial = 1.0;
  RtoBounds bounds;
  double initial_cwnd = 1.0;
  double initial_ssthresh = 64.0;
  int welcome_window = 10;
  int welcome_ascending_k = 3;
  bool freeze_rto_on_failure = true;

  // sweep
  std::string sweep_parameter = "none";  // none | flows | per | speed
  std::vector<double> sweep_values;
  std::string figure;  // fig8 | fig9 | fig10 | "" (which plot-data file to fill)
};

struct ScenarioParseError : SimError {
  ScenarioParseError(int line, const std::string& message)
      : SimError("line " + std::to_string(line) + ": " + message), line(line) {}
  int line;
};

// Parses the line-oriented `[section]` / `key = value` format. Unknown
// keys, missing required fields and invariant violations raise
// ScenarioParseError with the offending line number.
Scenario parse_scenario(std::istream& in);
Scenario parse_scenario_string(const std::string& text);
Scenario parse_scenario_file(const std::string& path);

// Final sanity pass; parse_scenario calls this, programmatic scenarios
// can call it directly.
void validate_scenario(const Scenario& sc);

// Route script for one seed (explicit events, or generated outages whose
// timing jitter is seeded).
RouteScript build_script(const Scenario& sc, std::uint64_t seed);

// Fully configured simulator for one (algorithm, seed) cell.
Simulator build_simulator(const Scenario& sc, const std::string& algorithm_id,
                          std::uint64_t seed, bool record_net_trace = false);

struct AccuracyResult {
  std::optional<double> ac, aw, al;  // per-truth-class recall; empty class -> n/a
  std::array<std::array<std::uint64_t, 3>, 3> confusion{};  // [truth][verdict]
  std::array<std::uint64_t, 3> abstained{};                 // per truth
};

AccuracyResult compute_accuracy(const std::vector<LossEvent>& events);

// Distinct data packets that reached the destination per second.
double compute_throughput(const std::vector<DeliveryRecord>& deliveries, double duration);

// Sum of the RTO in force at every data transmission in the trace.
double compute_sum_rto(const std::vector<SenderTraceRow>& trace);

struct CellMetrics {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::optional<double> sweep_value;
  AccuracyResult accuracy;
  double throughput = 0.0;
  double sum_rto = 0.0;
  std::uint64_t detected_losses = 0;
  std::uint64_t spurious_detections = 0;
  std::vector<LossEvent> events;
};

struct MetricsReport {
  Scenario scenario;
  std::vector<CellMetrics> cells;  // ordered (sweep value, algorithm, seed)
};

// One simulation cell.
CellMetrics run_cell(const Scenario& sc, const std::string& algorithm_id, std::uint64_t seed,
                     std::optional<double> sweep_value = std::nullopt);

// Every (sweep value ×) algorithm × seed cell; cells may run in parallel,
// assembly order is deterministic.
MetricsReport run_batch(const Scenario& sc, unsigned jobs = 0);

double median(std::vector<double> values);

// Median of a metric across the seeds of one (sweep value, algorithm)
// group; empty when no cell carries the metric.
std::optional<double> median_accuracy(const MetricsReport& report,
                                      std::optional<double> sweep_value,
                                      const std::string& algorithm, char which);
double median_throughput(const MetricsReport& report, const std::string& algorithm);
double median_sum_rto(const MetricsReport& report, const std::string& algorithm);

// metrics.csv, confusion.csv, losses.csv plus the per-figure plot-data
// files. Deterministic byte-for-byte for a fixed report.
void emit_reports(const MetricsReport& report, const std::string& out_dir);

// Canonical LossEvent CSV schema (the losses.csv payload columns).
std::string loss_event_csv_header();
std::string loss_event_to_csv(const LossEvent& e);
LossEvent loss_event_from_csv(const std::string& row);

// 9 significant digits, same formatting everywhere.
std::string format_double(double v);

}  // namespace manetsim
