#include "avtpids/report.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "avtpids/errors.hpp"
#include "json.hpp"

namespace avtpids {

namespace {

using nlohmann::json;

// Shortest representation that parses back to the identical double.
std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, const char* what) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw FormatError(std::string("cannot parse ") + what + " from '" + std::string(text) +
                      "'");
  }
  return v;
}

std::uint64_t parse_u64(std::string_view text, const char* what) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw FormatError(std::string("cannot parse ") + what + " from '" + std::string(text) +
                      "'");
  }
  return v;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw InvalidArgumentError(std::string("report field ") + what + " must be finite");
  }
}

void check_report_numbers(const EvalReport& r) {
  require_finite(r.beta, "beta");
  require_finite(r.precision, "precision");
  require_finite(r.recall, "recall");
  require_finite(r.f1, "f1");
  require_finite(r.latency_mean_s, "latency_mean_s");
  require_finite(r.latency_std_s, "latency_std_s");
  require_finite(r.latency_batch_mean_s, "latency_batch_mean_s");
  require_finite(r.latency_batch_std_s, "latency_batch_std_s");
  for (const SweepCandidate& c : r.sweep) {
    require_finite(c.alpha, "sweep alpha");
    require_finite(c.beta, "sweep beta");
    require_finite(c.precision, "sweep precision");
    require_finite(c.recall, "sweep recall");
    require_finite(c.f1, "sweep f1");
  }
}

void check_csv_id(const std::string& id, const char* what) {
  for (char c : id) {
    if (c == ',' || c == '"' || c == '\n' || c == '\r') {
      throw InvalidArgumentError(std::string(what) +
                                 " must not contain commas, quotes, or line breaks");
    }
  }
}

}  // namespace

LatencyStats latency_from_samples(const std::vector<double>& seconds, std::size_t windows,
                                  std::size_t batch_size) {
  if (seconds.empty()) {
    throw InvalidArgumentError("latency statistics need at least one sample");
  }
  if (windows == 0) throw InvalidArgumentError("latency statistics need windows >= 1");
  if (batch_size == 0) throw InvalidArgumentError("batch size must be positive");
  for (double s : seconds) {
    if (!std::isfinite(s) || s < 0.0) {
      throw InvalidArgumentError("latency samples must be finite and non-negative");
    }
  }

  LatencyStats out;
  out.repetitions = seconds.size();
  out.batch_size = batch_size;
  out.windows = windows;
  out.batches = (windows + batch_size - 1) / batch_size;

  double sum = 0.0;
  for (double s : seconds) sum += s;
  out.total_mean_s = sum / static_cast<double>(seconds.size());
  if (seconds.size() > 1) {
    double sq = 0.0;
    for (double s : seconds) {
      const double d = s - out.total_mean_s;
      sq += d * d;
    }
    out.total_std_s = std::sqrt(sq / static_cast<double>(seconds.size() - 1));
  }
  out.batch_mean_s = out.total_mean_s / static_cast<double>(out.batches);
  out.batch_std_s = out.total_std_s / static_cast<double>(out.batches);
  out.window_mean_s = out.total_mean_s / static_cast<double>(out.windows);
  out.window_std_s = out.total_std_s / static_cast<double>(out.windows);
  return out;
}

LatencyStats benchmark_run(const std::function<void()>& body, std::size_t repetitions,
                           std::size_t windows, std::size_t batch_size) {
  if (!body) throw InvalidArgumentError("benchmark body must be callable");
  if (repetitions == 0) throw InvalidArgumentError("benchmark needs repetitions >= 1");
  if (windows == 0) throw InvalidArgumentError("benchmark needs a non-empty window set");
  if (batch_size == 0) throw InvalidArgumentError("batch size must be positive");

  body();  // warm-up: touches caches and lazy allocations before timing
  std::vector<double> samples;
  samples.reserve(repetitions);
  for (std::size_t r = 0; r < repetitions; ++r) {
    const auto start = std::chrono::steady_clock::now();
    body();
    const auto stop = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double>(stop - start).count());
  }
  return latency_from_samples(samples, windows, batch_size);
}

LatencyStats benchmark_inference(Model& model, const WindowSet& windows,
                                 const std::vector<std::size_t>& indices,
                                 std::size_t repetitions, std::size_t batch_size) {
  if (indices.empty()) {
    throw InvalidArgumentError("benchmark needs a non-empty window set");
  }
  auto body = [&]() { reconstruction_errors(model, windows, indices, batch_size); };
  return benchmark_run(body, repetitions, indices.size(), batch_size);
}

void save_report_json(const EvalReport& report, const std::filesystem::path& path) {
  check_report_numbers(report);
  json sweep = json::array();
  for (const SweepCandidate& c : report.sweep) {
    sweep.push_back({{"alpha", c.alpha},
                     {"beta", c.beta},
                     {"tp", c.cm.tp},
                     {"fp", c.cm.fp},
                     {"tn", c.cm.tn},
                     {"fn", c.cm.fn},
                     {"precision", c.precision},
                     {"recall", c.recall},
                     {"f1", c.f1}});
  }
  const json doc = {
      {"schema", "avtpids-eval-report"},
      {"version", 1},
      {"dataset", report.dataset},
      {"detector", report.detector},
      {"w", report.w},
      {"beta", report.beta},
      {"metrics",
       {{"precision", report.precision}, {"recall", report.recall}, {"f1", report.f1}}},
      {"confusion",
       {{"tp", report.cm.tp}, {"fp", report.cm.fp}, {"tn", report.cm.tn}, {"fn", report.cm.fn}}},
      {"latency",
       {{"window_mean_s", report.latency_mean_s},
        {"window_std_s", report.latency_std_s},
        {"batch_mean_s", report.latency_batch_mean_s},
        {"batch_std_s", report.latency_batch_std_s}}},
      {"model", {{"params", report.params}, {"bytes", report.model_bytes}}},
      {"sweep", sweep},
  };
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

EvalReport load_report_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw FormatError("invalid report JSON in " + path.string() + ": " + e.what());
  }
  EvalReport report;
  try {
    if (doc.at("schema").get<std::string>() != "avtpids-eval-report") {
      throw FormatError("not an evaluation report: " + path.string());
    }
    if (doc.at("version").get<int>() != 1) {
      throw FormatError("unsupported report version in " + path.string());
    }
    report.dataset = doc.at("dataset").get<std::string>();
    report.detector = doc.at("detector").get<std::string>();
    report.w = doc.at("w").get<std::size_t>();
    report.beta = doc.at("beta").get<double>();
    const json& metrics = doc.at("metrics");
    report.precision = metrics.at("precision").get<double>();
    report.recall = metrics.at("recall").get<double>();
    report.f1 = metrics.at("f1").get<double>();
    const json& cmj = doc.at("confusion");
    report.cm.tp = cmj.at("tp").get<std::uint64_t>();
    report.cm.fp = cmj.at("fp").get<std::uint64_t>();
    report.cm.tn = cmj.at("tn").get<std::uint64_t>();
    report.cm.fn = cmj.at("fn").get<std::uint64_t>();
    const json& lat = doc.at("latency");
    report.latency_mean_s = lat.at("window_mean_s").get<double>();
    report.latency_std_s = lat.at("window_std_s").get<double>();
    report.latency_batch_mean_s = lat.at("batch_mean_s").get<double>();
    report.latency_batch_std_s = lat.at("batch_std_s").get<double>();
    const json& model = doc.at("model");
    report.params = model.at("params").get<std::size_t>();
    report.model_bytes = model.at("bytes").get<std::uint64_t>();
    for (const json& cj : doc.at("sweep")) {
      SweepCandidate c;
      c.alpha = cj.at("alpha").get<double>();
      c.beta = cj.at("beta").get<double>();
      c.cm.tp = cj.at("tp").get<std::uint64_t>();
      c.cm.fp = cj.at("fp").get<std::uint64_t>();
      c.cm.tn = cj.at("tn").get<std::uint64_t>();
      c.cm.fn = cj.at("fn").get<std::uint64_t>();
      c.precision = cj.at("precision").get<double>();
      c.recall = cj.at("recall").get<double>();
      c.f1 = cj.at("f1").get<double>();
      report.sweep.push_back(c);
    }
  } catch (const json::exception& e) {
    throw FormatError("report JSON in " + path.string() +
                      " violates the schema: " + e.what());
  }
  return report;
}

std::string report_csv_header() {
  return "dataset,detector,w,beta,precision,recall,f1,tp,fp,tn,fn,"
         "latency_mean_s,latency_std_s,params,model_bytes";
}

void save_reports_csv(const std::vector<EvalReport>& reports,
                      const std::filesystem::path& path) {
  std::ostringstream body;
  body << report_csv_header() << '\n';
  for (const EvalReport& r : reports) {
    check_report_numbers(r);
    check_csv_id(r.dataset, "dataset id");
    check_csv_id(r.detector, "detector id");
    body << r.dataset << ',' << r.detector << ',' << r.w << ',' << fmt_double(r.beta) << ','
         << fmt_double(r.precision) << ',' << fmt_double(r.recall) << ',' << fmt_double(r.f1)
         << ',' << r.cm.tp << ',' << r.cm.fp << ',' << r.cm.tn << ',' << r.cm.fn << ','
         << fmt_double(r.latency_mean_s) << ',' << fmt_double(r.latency_std_s) << ','
         << r.params << ',' << r.model_bytes << '\n';
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << body.str();
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<EvalReport> load_reports_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError("empty report CSV: " + path.string());
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != report_csv_header()) {
    throw FormatError("unexpected report CSV header in " + path.string());
  }

  std::vector<EvalReport> reports;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const std::size_t comma = rest.find(',');
      if (comma == std::string_view::npos) {
        fields.push_back(rest);
        break;
      }
      fields.push_back(rest.substr(0, comma));
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 15) {
      throw FormatError("line " + std::to_string(lineno) + " of " + path.string() + " has " +
                        std::to_string(fields.size()) + " fields, expected 15");
    }

    EvalReport r;
    r.dataset = std::string(fields[0]);
    r.detector = std::string(fields[1]);
    r.w = static_cast<std::size_t>(parse_u64(fields[2], "w"));
    r.beta = parse_double(fields[3], "beta");
    r.precision = parse_double(fields[4], "precision");
    r.recall = parse_double(fields[5], "recall");
    r.f1 = parse_double(fields[6], "f1");
    r.cm.tp = parse_u64(fields[7], "tp");
    r.cm.fp = parse_u64(fields[8], "fp");
    r.cm.tn = parse_u64(fields[9], "tn");
    r.cm.fn = parse_u64(fields[10], "fn");
    r.latency_mean_s = parse_double(fields[11], "latency_mean_s");
    r.latency_std_s = parse_double(fields[12], "latency_std_s");
    r.params = static_cast<std::size_t>(parse_u64(fields[13], "params"));
    r.model_bytes = parse_u64(fields[14], "model_bytes");
    reports.push_back(std::move(r));
  }
  return reports;
}

void emit_report(const EvalReport& report, const std::string& format,
                 const std::filesystem::path& path) {
  if (format == "json") {
    save_report_json(report, path);
  } else if (format == "csv") {
    save_reports_csv({report}, path);
  } else {
    throw InvalidArgumentError("unknown report format '" + format + "' (use json or csv)");
  }
}

}  // namespace avtpids
