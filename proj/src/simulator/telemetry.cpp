#include <string>

#include "tpeq/errors.hpp"
#include "tpeq/simulator.hpp"
#include "tpeq/text.hpp"

namespace tpeq {

namespace {
constexpr std::string_view kSummaryHeader = "tpeq-summary v1";
}

std::string telemetry_csv(const SimResult& result) {
  using text::format_real;
  std::string out(kTelemetryHeader);
  out += "\n";
  for (const auto& e : result.epochs) {
    for (std::size_t t = 0; t < e.threads.size(); ++t) {
      const ThreadEpochRecord& r = e.threads[t];
      out += std::to_string(e.epoch_index) + "," + std::to_string(t) + "," + std::to_string(r.config) + "," +
             std::to_string(r.retired) + "," + format_real(r.cpi) + "," + format_real(r.stack.compute) + "," +
             format_real(r.stack.memory) + "," + format_real(r.stack.branch) + "," + format_real(r.stack.synch) +
             "," + format_real(r.power_w) + "," + format_real(r.stalled_frac) + "\n";
    }
  }
  return out;
}

std::vector<TelemetryRow> parse_telemetry_csv(std::string_view content) {
  std::vector<TelemetryRow> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header = false;
  while (pos < content.size()) {
    const auto eol = content.find('\n', pos);
    const auto end = eol == std::string_view::npos ? content.size() : eol;
    const std::string_view line = text::trim(content.substr(pos, end - pos));
    pos = end == content.size() ? end : end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (!header) {
      if (line != kTelemetryHeader) throw ParseError("unexpected telemetry header", line_no);
      header = true;
      continue;
    }
    const auto f = text::split(line, ',');
    if (f.size() != 11) throw ParseError("expected 11 fields, found " + std::to_string(f.size()), line_no);
    TelemetryRow row;
    row.epoch = static_cast<int>(text::parse_int(f[0], line_no));
    row.thread = static_cast<int>(text::parse_int(f[1], line_no));
    row.record.config = static_cast<int>(text::parse_int(f[2], line_no));
    row.record.retired = text::parse_int(f[3], line_no);
    row.record.cpi = text::parse_real(f[4], line_no);
    row.record.stack = {text::parse_real(f[5], line_no), text::parse_real(f[6], line_no),
                        text::parse_real(f[7], line_no), text::parse_real(f[8], line_no)};
    row.record.power_w = text::parse_real(f[9], line_no);
    row.record.stalled_frac = text::parse_real(f[10], line_no);
    rows.push_back(row);
  }
  if (!header) throw ParseError("empty telemetry file", 0);
  return rows;
}

RunSummary summarize(const SimResult& result, double budget_w, bool oracle) {
  RunSummary s;
  s.workload_name = result.workload_name;
  s.workload_hash = result.workload_hash;
  s.policy = result.policy;
  s.oracle = oracle;
  s.budget_w = budget_w;
  s.epoch_cycles = result.epoch_cycles;
  s.makespan_cycles = result.total_cycles;
  s.epochs = static_cast<int>(result.epochs.size());
  s.total_stall_cycles = result.total_stall_cycles();
  s.stall_cycles = result.stall_cycles;
  s.overshoot = result.overshoot;
  s.cpi_prediction_mare = result.cpi_prediction_mare;
  s.power_prediction_mare = result.power_prediction_mare;
  return s;
}

std::string serialize_summary(const RunSummary& s) {
  using text::format_real;
  std::string out(kSummaryHeader);
  out += "\n";
  out += "workload: " + s.workload_name + "\n";
  out += "workload-hash: " + s.workload_hash + "\n";
  out += "policy: " + s.policy + "\n";
  out += "oracle: " + std::string(s.oracle ? "1" : "0") + "\n";
  out += "budget-w: " + format_real(s.budget_w) + "\n";
  out += "epoch-cycles: " + std::to_string(s.epoch_cycles) + "\n";
  out += "makespan-cycles: " + std::to_string(s.makespan_cycles) + "\n";
  out += "epochs: " + std::to_string(s.epochs) + "\n";
  out += "total-stall-cycles: " + std::to_string(s.total_stall_cycles) + "\n";
  out += "stall-cycles:";
  for (const auto c : s.stall_cycles) out += " " + std::to_string(c);
  out += "\n";
  out += "mean-overshoot-w: " + format_real(s.overshoot.mean_over_w) + "\n";
  out += "max-overshoot-w: " + format_real(s.overshoot.max_over_w) + "\n";
  out += "epochs-over-budget: " + std::to_string(s.overshoot.epochs_over_budget) + "\n";
  out += "max-consecutive-over-trigger: " + std::to_string(s.overshoot.max_consecutive_over_trigger) + "\n";
  out += "throttle-count: " + std::to_string(s.overshoot.throttle_count) + "\n";
  out += "infeasible-epochs: " + std::to_string(s.overshoot.infeasible_epochs) + "\n";
  out += "cpi-prediction-mare: " + format_real(s.cpi_prediction_mare) + "\n";
  out += "power-prediction-mare: " + format_real(s.power_prediction_mare) + "\n";
  return out;
}

RunSummary parse_summary(std::string_view content) {
  RunSummary s;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header = false;
  while (pos < content.size()) {
    const auto eol = content.find('\n', pos);
    const auto end = eol == std::string_view::npos ? content.size() : eol;
    const std::string_view line = text::trim(content.substr(pos, end - pos));
    pos = end == content.size() ? end : end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != kSummaryHeader) throw ParseError("missing '" + std::string(kSummaryHeader) + "' header", line_no);
      header = true;
      continue;
    }
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) throw ParseError("expected 'key: value'", line_no);
    const std::string_view key = line.substr(0, colon);
    const std::string_view value = text::trim(line.substr(colon + 1));
    if (key == "workload") s.workload_name = std::string(value);
    else if (key == "workload-hash") s.workload_hash = std::string(value);
    else if (key == "policy") s.policy = std::string(value);
    else if (key == "oracle") s.oracle = text::parse_int(value, line_no) != 0;
    else if (key == "budget-w") s.budget_w = text::parse_real(value, line_no);
    else if (key == "epoch-cycles") s.epoch_cycles = text::parse_int(value, line_no);
    else if (key == "makespan-cycles") s.makespan_cycles = text::parse_int(value, line_no);
    else if (key == "epochs") s.epochs = static_cast<int>(text::parse_int(value, line_no));
    else if (key == "total-stall-cycles") s.total_stall_cycles = text::parse_int(value, line_no);
    else if (key == "stall-cycles") {
      s.stall_cycles.clear();
      for (const auto tok : text::split_ws(value)) s.stall_cycles.push_back(text::parse_int(tok, line_no));
    } else if (key == "mean-overshoot-w") s.overshoot.mean_over_w = text::parse_real(value, line_no);
    else if (key == "max-overshoot-w") s.overshoot.max_over_w = text::parse_real(value, line_no);
    else if (key == "epochs-over-budget") s.overshoot.epochs_over_budget = static_cast<int>(text::parse_int(value, line_no));
    else if (key == "max-consecutive-over-trigger") {
      s.overshoot.max_consecutive_over_trigger = static_cast<int>(text::parse_int(value, line_no));
    } else if (key == "throttle-count") s.overshoot.throttle_count = static_cast<int>(text::parse_int(value, line_no));
    else if (key == "infeasible-epochs") s.overshoot.infeasible_epochs = static_cast<int>(text::parse_int(value, line_no));
    else if (key == "cpi-prediction-mare") s.cpi_prediction_mare = text::parse_real(value, line_no);
    else if (key == "power-prediction-mare") s.power_prediction_mare = text::parse_real(value, line_no);
    else throw ParseError("unknown summary key '" + std::string(key) + "'", line_no);
  }
  if (!header) throw ParseError("empty summary file", 0);
  if (s.workload_hash.empty()) throw ParseError("summary has no workload-hash", 0);
  return s;
}

}  // namespace tpeq
