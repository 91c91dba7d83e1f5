#include "chbsim/trace.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

#include "chbsim/errors.hpp"

namespace chbsim {

std::string_view to_string(StopMode mode) {
  switch (mode) {
    case StopMode::TargetGap: return "target-gap";
    case StopMode::MaxIterations: return "max-iterations";
    case StopMode::GradThreshold: return "grad-threshold";
  }
  return "?";
}

StopMode parse_stop_mode(std::string_view name) {
  if (name == "target-gap") return StopMode::TargetGap;
  if (name == "max-iterations") return StopMode::MaxIterations;
  if (name == "grad-threshold") return StopMode::GradThreshold;
  throw ValidationError("unknown stopping mode '" + std::string(name) + "'");
}

bool should_stop(const StoppingRule& rule, const IterationTrace& rec) {
  if (rec.k >= rule.max_k) return true;
  switch (rule.mode) {
    case StopMode::TargetGap: return rec.f_gap <= rule.target;
    case StopMode::GradThreshold: return rec.grad_norm_sq <= rule.target;
    case StopMode::MaxIterations: return false;
  }
  return false;
}

void Trace::append(IterationTrace rec) {
  const long expected = records_.empty() ? 1 : records_.back().k + 1;
  if (rec.k != expected) {
    throw ProtocolError("trace: expected k=" + std::to_string(expected) + ", got " +
                        std::to_string(rec.k));
  }
  long set = 0;
  for (bool f : rec.transmit_flags) set += f ? 1 : 0;
  if (set != rec.comms_this_iter) {
    throw ProtocolError("trace: comms_this_iter=" + std::to_string(rec.comms_this_iter) +
                        " but " + std::to_string(set) + " transmit flags are set");
  }
  if (!records_.empty() && rec.transmit_flags.size() != records_.back().transmit_flags.size()) {
    throw ProtocolError("trace: worker count changed between iterations");
  }
  rec.comms_cumulative = (records_.empty() ? 0 : records_.back().comms_cumulative) + set;
  records_.push_back(std::move(rec));
}

void Trace::set_meta(const std::string& key, const std::string& value) {
  for (auto& [k, v] : metadata_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  metadata_.emplace_back(key, value);
}

std::string Trace::meta(std::string_view key) const {
  for (const auto& [k, v] : metadata_) {
    if (k == key) return v;
  }
  return {};
}

std::vector<long> Trace::transmissions_from_flags(long k) const {
  std::vector<long> s(records_.empty() ? 0 : records_.front().transmit_flags.size(), 0);
  const std::size_t limit =
      k < 0 ? records_.size() : std::min(records_.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < limit; ++i) {
    const auto& flags = records_[i].transmit_flags;
    for (std::size_t m = 0; m < flags.size(); ++m) s[m] += flags[m] ? 1 : 0;
  }
  return s;
}

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

void write_meta_line(std::ostream& out, const std::string& key, const std::string& value) {
  out << "# " << key << '=' << value << '\n';
}

double parse_real_field(const std::string& s, std::size_t line) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ParseError("bad real '" + s + "'", line);
  return v;
}

long parse_int_field(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) throw ParseError("bad integer '" + s + "'", line);
  return v;
}

}  // namespace

void write_csv(const Trace& trace, std::ostream& out) { write_csv(trace, {}, out); }

void write_csv(const Trace& trace, const Metadata& extra, std::ostream& out) {
  if (trace.empty()) throw PreconditionError("write_csv: trace is empty");
  for (const auto& [k, v] : trace.metadata()) write_meta_line(out, k, v);
  for (const auto& [k, v] : extra) write_meta_line(out, k, v);
  out << kCsvHeader << '\n';
  std::string flags;
  for (const auto& r : trace.records()) {
    flags.clear();
    for (bool f : r.transmit_flags) flags += f ? '1' : '0';
    out << r.k << ',' << format_real(r.objective) << ',' << format_real(r.f_gap) << ','
        << format_real(r.grad_norm_sq) << ',' << format_real(r.agg_grad_norm_sq) << ','
        << format_real(r.lyapunov) << ',' << r.comms_this_iter << ',' << r.comms_cumulative
        << ',' << flags << '\n';
  }
  if (!out) throw Error("write_csv: stream write failed");
}

Trace read_csv(std::istream& in) {
  Trace trace;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header_seen) {
      if (line.rfind("# ", 0) == 0) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("metadata line without '='", line_no);
        trace.metadata().emplace_back(line.substr(2, eq - 2), line.substr(eq + 1));
        continue;
      }
      if (line != kCsvHeader) throw ParseError("unexpected header row '" + line + "'", line_no);
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 9) throw ParseError("expected 9 columns", line_no);
    IterationTrace r;
    r.k = parse_int_field(cells[0], line_no);
    r.objective = parse_real_field(cells[1], line_no);
    r.f_gap = parse_real_field(cells[2], line_no);
    r.grad_norm_sq = parse_real_field(cells[3], line_no);
    r.agg_grad_norm_sq = parse_real_field(cells[4], line_no);
    r.lyapunov = parse_real_field(cells[5], line_no);
    r.comms_this_iter = static_cast<int>(parse_int_field(cells[6], line_no));
    const long cum = parse_int_field(cells[7], line_no);
    for (char c : cells[8]) {
      if (c != '0' && c != '1') throw ParseError("flags must be a bitstring", line_no);
      r.transmit_flags.push_back(c == '1');
    }
    try {
      trace.append(std::move(r));
    } catch (const ProtocolError& e) {
      throw ParseError(e.what(), line_no);
    }
    if (trace.back().comms_cumulative != cum) throw ParseError("comms_cum is not the running sum", line_no);
  }
  if (!header_seen) throw ParseError("missing header row", line_no);
  if (trace.empty()) throw ParseError("no data rows", line_no);
  return trace;
}

}  // namespace chbsim
