#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cwescan/model_backend.hpp"

namespace cwescan {

/// First arrival minus request time, in seconds. Throws ArgumentError on an
/// empty trace.
double ttft(const TimingTrace& trace);

/// Gaps between consecutive arrivals, in seconds; empty for < 2 arrivals.
std::vector<double> inter_token_latencies(const TimingTrace& trace);

/// Decode-phase throughput: tokens after each trace's first, divided by the
/// summed first-to-last spans. Traces with < 2 arrivals are skipped; throws
/// ArgumentError if none qualify.
double tokens_per_second(std::span<const TimingTrace> traces);

/// Nearest-rank percentile: the value at 1-based rank ceil(p/100 * n) of the
/// sorted sample. `p` in (0, 100]. Throws ArgumentError on an empty list or a
/// p outside the range.
double percentile(std::span<const double> values, double p);

struct BenchConfig {
  std::vector<std::string> workload;  // prompts, used round-robin
  std::size_t warmup_requests = 0;
  std::size_t measured_requests = 1;
  int max_new_tokens = 64;
  std::size_t max_failures = 0;  // failed measured requests tolerated
  std::string host_description;
};

struct BenchReport {
  std::vector<double> ttft_seconds;  // per measured request
  double ttft_median = 0.0;
  double ttft_mean = 0.0;
  double tokens_per_second = 0.0;
  double latency_p50 = 0.0;  // inter-token latency percentiles, pooled
  double latency_p95 = 0.0;
  double latency_p99 = 0.0;
  std::size_t request_count = 0;   // measured requests that succeeded
  std::size_t failed_requests = 0;
  std::size_t warmup_requests = 0;
  std::size_t total_tokens = 0;
  double wall_seconds = 0.0;
  std::string host_description;
  std::string backend_id;

  nlohmann::json to_json() const;
};

/// Runs warmup (discarded) then measured requests strictly one at a time.
/// Throws ArgumentError for measured_requests < 1 or an empty workload, and
/// BenchError when failures exceed max_failures or no trace yields timings.
BenchReport run_bench(ModelBackend& backend, const BenchConfig& config,
                      MonotonicClock& wall_clock);
BenchReport run_bench(ModelBackend& backend, const BenchConfig& config);

/// Warmup only; used for dry runs. Returns the number of requests issued.
std::size_t run_warmup(ModelBackend& backend, const BenchConfig& config);

/// Plain-text table with one row per timing metric.
std::string format_bench_summary(const BenchReport& report);

}  // namespace cwescan
