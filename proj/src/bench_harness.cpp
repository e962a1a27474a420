#include "cwescan/bench_harness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "cwescan/error.hpp"

namespace cwescan {

double ttft(const TimingTrace& trace) {
  if (trace.token_arrivals.empty()) throw ArgumentError("trace has no token arrivals");
  return to_seconds(trace.token_arrivals.front() - trace.request_sent_at);
}

std::vector<double> inter_token_latencies(const TimingTrace& trace) {
  std::vector<double> gaps;
  for (std::size_t i = 1; i < trace.token_arrivals.size(); ++i) {
    gaps.push_back(to_seconds(trace.token_arrivals[i] - trace.token_arrivals[i - 1]));
  }
  return gaps;
}

double tokens_per_second(std::span<const TimingTrace> traces) {
  std::size_t tokens = 0;
  std::chrono::nanoseconds span{0};
  bool any = false;
  for (const auto& t : traces) {
    if (t.token_arrivals.size() < 2) continue;
    any = true;
    tokens += t.token_arrivals.size() - 1;
    span += t.token_arrivals.back() - t.token_arrivals.front();
  }
  if (!any) throw ArgumentError("no trace has two or more token arrivals");
  if (span.count() <= 0) throw ArgumentError("traces have zero decode time");
  return static_cast<double>(tokens) / to_seconds(span);
}

double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw ArgumentError("percentile of an empty list");
  if (!(p > 0.0 && p <= 100.0)) throw ArgumentError("percentile must be in (0, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // Guard against p/100*n landing a hair above an integer (e.g. 0.95*20).
  const double scaled = p * n / 100.0;
  double rank = std::ceil(scaled);
  if (rank - scaled > 1.0 - 1e-9) rank -= 1.0;
  const std::size_t index = static_cast<std::size_t>(std::clamp(rank, 1.0, n)) - 1;
  return sorted[index];
}

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

CompletionRequest request_for(const BenchConfig& config, std::size_t i) {
  CompletionRequest req;
  req.prompt = config.workload[i % config.workload.size()];
  req.max_new_tokens = config.max_new_tokens;
  req.stream = true;
  return req;
}

void check_config(const BenchConfig& config) {
  if (config.workload.empty()) throw ArgumentError("bench workload is empty");
  if (config.max_new_tokens < 1) throw ArgumentError("max_new_tokens must be >= 1");
}

}  // namespace

std::size_t run_warmup(ModelBackend& backend, const BenchConfig& config) {
  check_config(config);
  for (std::size_t i = 0; i < config.warmup_requests; ++i) {
    try {
      backend.complete(request_for(config, i));
    } catch (const Error&) {
      // Warmup failures do not count; they surface again during measurement.
    }
  }
  return config.warmup_requests;
}

BenchReport run_bench(ModelBackend& backend, const BenchConfig& config, MonotonicClock& wall_clock) {
  if (config.measured_requests < 1) throw ArgumentError("measured_requests must be >= 1");
  check_config(config);

  run_warmup(backend, config);

  const Timestamp started = wall_clock.now();
  std::vector<TimingTrace> traces;
  std::vector<std::string> failures;
  for (std::size_t i = 0; i < config.measured_requests; ++i) {
    try {
      traces.push_back(backend.complete(request_for(config, config.warmup_requests + i)).trace);
    } catch (const Error& e) {
      failures.push_back(e.what());
    }
  }
  const Timestamp finished = wall_clock.now();

  if (failures.size() > config.max_failures) {
    throw BenchError(std::to_string(failures.size()) + " of " + std::to_string(config.measured_requests) +
                     " measured requests failed (tolerance " + std::to_string(config.max_failures) +
                     "); first: " + failures.front());
  }

  BenchReport report;
  report.backend_id = backend.id();
  report.host_description = config.host_description;
  report.warmup_requests = config.warmup_requests;
  report.failed_requests = failures.size();
  report.request_count = traces.size();
  report.wall_seconds = to_seconds(finished - started);

  std::vector<double> gaps;
  for (const auto& t : traces) {
    report.total_tokens += t.token_count();
    if (!t.token_arrivals.empty()) report.ttft_seconds.push_back(ttft(t));
    const auto g = inter_token_latencies(t);
    gaps.insert(gaps.end(), g.begin(), g.end());
  }
  if (report.ttft_seconds.empty() || gaps.empty()) {
    throw BenchError("measured requests produced no streamed tokens to time");
  }
  report.ttft_median = median_of(report.ttft_seconds);
  report.ttft_mean = std::accumulate(report.ttft_seconds.begin(), report.ttft_seconds.end(), 0.0) /
                     static_cast<double>(report.ttft_seconds.size());
  report.tokens_per_second = tokens_per_second(traces);
  report.latency_p50 = percentile(gaps, 50);
  report.latency_p95 = percentile(gaps, 95);
  report.latency_p99 = percentile(gaps, 99);
  return report;
}

BenchReport run_bench(ModelBackend& backend, const BenchConfig& config) {
  SteadyClock clock;
  return run_bench(backend, config, clock);
}

nlohmann::json BenchReport::to_json() const {
  return {{"schema_version", 1},
          {"kind", "bench_report"},
          {"notes",
           "latency percentiles are nearest-rank over pooled inter-token gaps of measured requests; "
           "TTFT summary is the median of per-request values; TPS excludes time to first token; "
           "tokens are streamed units as delivered by the backend"},
          {"ttft_seconds", {{"per_request", ttft_seconds}, {"median", ttft_median}, {"mean", ttft_mean}}},
          {"tokens_per_second", tokens_per_second},
          {"latency_p50", latency_p50},
          {"latency_p95", latency_p95},
          {"latency_p99", latency_p99},
          {"environment",
           {{"request_count", request_count},
            {"failed_requests", failed_requests},
            {"warmup_requests", warmup_requests},
            {"total_tokens", total_tokens},
            {"wall_seconds", wall_seconds},
            {"host_description", host_description},
            {"backend_id", backend_id}}}};
}

std::string format_bench_summary(const BenchReport& r) {
  std::ostringstream out;
  out << "Inter-token latency percentiles (nearest-rank, pooled); TTFT = median per request\n";
  out << "+----------------------------+------------------+\n";
  out << "| Metric                     | Value            |\n";
  out << "+----------------------------+------------------+\n";
  auto row = [&](const char* name, double value, const char* unit) {
    std::ostringstream v;
    v << std::fixed << std::setprecision(3) << value << " " << unit;
    out << "| " << std::left << std::setw(26) << name << " | " << std::setw(16) << v.str() << " |\n";
  };
  row("Time to First Token (TTFT)", r.ttft_median, "seconds");
  {
    std::ostringstream v;
    v << std::fixed << std::setprecision(2) << r.tokens_per_second << " tokens/sec";
    out << "| " << std::left << std::setw(26) << "Tokens per Second (TPS)" << " | " << std::setw(16) << v.str()
        << " |\n";
  }
  row("Median Latency (P50)", r.latency_p50, "seconds");
  row("P95 Latency", r.latency_p95, "seconds");
  row("P99 Latency", r.latency_p99, "seconds");
  out << "+----------------------------+------------------+\n";
  out << "requests=" << r.request_count << " failed=" << r.failed_requests << " warmup=" << r.warmup_requests
      << " tokens=" << r.total_tokens << " wall=" << std::fixed << std::setprecision(3) << r.wall_seconds << "s";
  if (!r.host_description.empty()) out << " host=\"" << r.host_description << "\"";
  out << "\n";
  return out.str();
}

}  // namespace cwescan
