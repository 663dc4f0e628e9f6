#include "fracq/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace fracq::harness {
namespace {

using json = nlohmann::ordered_json;

const char* model_name(estimate::Model m) {
  return m == estimate::Model::linear_bd ? "linear_bd" : "mm1";
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

// Runs body(replicate_index) over [0, count) on a small worker pool. Results
// must be written into replicate-indexed slots so the reduction is independent
// of scheduling.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, const Body& body) {
  threads = std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(count, 1));
  if (threads <= 1) {
    for (std::size_t r = 0; r < count; ++r) body(r);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t r = next.fetch_add(1);
        if (r >= count) return;
        body(r);
      }
    });
  }
  for (auto& th : pool) th.join();
}

struct ReplicateEstimates {
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double mu = std::numeric_limits<double>::quiet_NaN();
  bool lambda_covered = false;
  bool mu_covered = false;
  bool ok = false;
};

// One fit per replicate; stream_id is the replicate index offset by a
// per-(cell, n) base so every (cell, n, replicate) triple sees an independent
// substream regardless of thread count.
std::vector<ReplicateEstimates> run_replicates(const ExperimentConfig& config,
                                               const GridCell& cell, std::size_t n,
                                               std::uint64_t stream_base) {
  std::vector<ReplicateEstimates> out(config.replicates);
  parallel_for(config.replicates, config.threads, [&](std::size_t r) {
    rng::RngStream stream(config.seed, stream_base + r);
    ReplicateEstimates& slot = out[r];
    try {
      sim::SojournData data;
      estimate::EstimationResult est;
      if (config.model == estimate::Model::linear_bd) {
        data = generate_linear_bd_sample(cell, n, stream);
        est = estimate::fit_linear_bd(data, config.level);
      } else {
        data = generate_mm1_sample(cell, n, stream);
        est = estimate::fit_mm1(data, config.level, config.exclude_zero_state);
      }
      slot.alpha = est.alpha_hat;
      slot.lambda = est.lambda_hat;
      slot.mu = est.mu_hat;
      slot.lambda_covered = est.ci_lambda.contains(cell.lambda);
      slot.mu_covered = est.ci_mu.contains(cell.mu);
      slot.ok = true;
    } catch (const std::exception&) {
      slot.ok = false;  // counted as a failure in the tables
    }
  });
  return out;
}

BiasCvRow summarize(const GridCell& cell, std::size_t n, const char* name,
                    double truth, const std::vector<double>& values,
                    std::size_t replicates, std::size_t failures) {
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  BiasCvRow row{cell, n, name, 100.0 * std::abs(mean - truth) / truth, std::nullopt,
                replicates, failures};
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    row.cv_percent = 100.0 * sd / mean;
  }
  return row;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (grid.empty()) throw std::invalid_argument("experiment grid is empty");
  if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  for (std::size_t n : sample_sizes) {
    if (n < 3) throw std::invalid_argument("sample sizes must be >= 3");
  }
  for (const GridCell& cell : grid) {
    sim::ModelParams{cell.alpha, cell.lambda, cell.mu, 0}.validate();
  }
  if (!(level > 0.0) || !(level < 1.0)) {
    throw std::invalid_argument("confidence level must be in (0, 1)");
  }
}

sim::SojournData generate_linear_bd_sample(const GridCell& cell, std::size_t n,
                                           rng::RngStream& stream) {
  const double theta = cell.lambda + cell.mu;
  const double p_birth = cell.lambda / theta;
  sim::SojournData data;
  data.records.reserve(n);
  for (std::size_t k = 1; k <= n; ++k) {
    const double s = rng::sample_ml_sojourn(stream, cell.alpha, theta * k);
    const bool birth = stream.uniform01() < p_birth;
    data.records.push_back(
        {static_cast<long>(k), s, birth ? sim::EventType::birth : sim::EventType::death});
    if (birth) {
      ++data.n_births;
    } else {
      ++data.n_deaths;
    }
  }
  return data;
}

sim::SojournData generate_mm1_sample(const GridCell& cell, std::size_t n,
                                     rng::RngStream& stream) {
  sim::ModelParams params{cell.alpha, cell.lambda, cell.mu, static_cast<long>(n)};
  sim::StopRule stop;
  stop.max_events = n;
  return sim::extract_sojourns(sim::simulate_mm1(params, stream, stop));
}

BiasCvTable run_bias_cv_experiment(const ExperimentConfig& config) {
  config.validate();
  BiasCvTable table{config, {}};
  std::uint64_t stream_base = 0;
  for (const GridCell& cell : config.grid) {
    for (std::size_t n : config.sample_sizes) {
      const auto reps = run_replicates(config, cell, n, stream_base);
      stream_base += config.replicates;
      std::vector<double> alphas, lambdas, mus;
      std::size_t failures = 0;
      for (const auto& r : reps) {
        if (!r.ok) {
          ++failures;
          continue;
        }
        alphas.push_back(r.alpha);
        lambdas.push_back(r.lambda);
        mus.push_back(r.mu);
      }
      if (alphas.empty()) {
        table.rows.push_back({cell, n, "alpha", std::numeric_limits<double>::quiet_NaN(),
                              std::nullopt, config.replicates, failures});
        continue;
      }
      table.rows.push_back(
          summarize(cell, n, "alpha", cell.alpha, alphas, config.replicates, failures));
      table.rows.push_back(
          summarize(cell, n, "lambda", cell.lambda, lambdas, config.replicates, failures));
      table.rows.push_back(
          summarize(cell, n, "mu", cell.mu, mus, config.replicates, failures));
    }
  }
  return table;
}

CoverageTable run_coverage_experiment(const ExperimentConfig& config) {
  config.validate();
  CoverageTable table{config, {}};
  std::uint64_t stream_base = 0;
  for (const GridCell& cell : config.grid) {
    for (std::size_t n : config.sample_sizes) {
      const auto reps = run_replicates(config, cell, n, stream_base);
      stream_base += config.replicates;
      std::size_t failures = 0, hit_l = 0, hit_m = 0, ok = 0;
      for (const auto& r : reps) {
        if (!r.ok) {
          ++failures;
          continue;
        }
        ++ok;
        hit_l += r.lambda_covered;
        hit_m += r.mu_covered;
      }
      const double denom = ok > 0 ? static_cast<double>(ok) : 1.0;
      table.rows.push_back({cell, n, hit_l / denom, hit_m / denom, config.replicates,
                            failures});
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Ingestion.
// ---------------------------------------------------------------------------

namespace {

// Days since 1970-01-01 (Howard Hinnant's days_from_civil).
long days_from_civil(long y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

bool parse_iso_date(const std::string& text, long* ordinal) {
  int y = 0;
  unsigned m = 0, d = 1;
  const char* s = text.c_str();
  char extra;
  if (std::sscanf(s, "%d-%u-%u%c", &y, &m, &d, &extra) == 3 ||
      (std::sscanf(s, "%d-%u%c", &y, &m, &extra) == 2 && (d = 1))) {
    if (m < 1 || m > 12 || d < 1 || d > 31) return false;
    *ordinal = days_from_civil(y, m, d);
    return true;
  }
  return false;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

std::string strip(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n\xEF\xBB\xBF");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

FinancialSeries ingest_series(std::istream& in, const std::string& interval_label) {
  FinancialSeries series;
  series.sampling_interval = interval_label;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw std::invalid_argument("series file is empty");
  ++line_no;
  {
    auto fields = split_csv_line(strip(line));
    if (fields.size() != 2 || strip(fields[0]) != "date" || strip(fields[1]) != "value") {
      throw std::invalid_argument("line 1: expected header `date,value`");
    }
  }
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = strip(line);
    if (trimmed.empty()) continue;
    auto fields = split_csv_line(trimmed);
    if (fields.size() != 2) {
      throw std::invalid_argument("line " + std::to_string(line_no) +
                                  ": expected two fields `date,value`");
    }
    Observation obs;
    obs.date_iso = strip(fields[0]);
    if (!parse_iso_date(obs.date_iso, &obs.day_ordinal)) {
      throw std::invalid_argument("line " + std::to_string(line_no) +
                                  ": unparseable ISO-8601 date `" + obs.date_iso + "`");
    }
    const std::string value_text = strip(fields[1]);
    const char* begin = value_text.data();
    const char* end = begin + value_text.size();
    auto [ptr, ec] = std::from_chars(begin, end, obs.value);
    if (ec != std::errc() || ptr != end || !std::isfinite(obs.value)) {
      throw std::invalid_argument("line " + std::to_string(line_no) +
                                  ": unparseable value `" + value_text + "`");
    }
    series.observations.push_back(std::move(obs));
  }
  if (series.observations.size() < 2) {
    throw std::invalid_argument("series needs at least 2 observations");
  }
  std::stable_sort(series.observations.begin(), series.observations.end(),
                   [](const Observation& a, const Observation& b) {
                     return a.day_ordinal < b.day_ordinal;
                   });
  for (std::size_t j = 1; j < series.observations.size(); ++j) {
    if (series.observations[j].day_ordinal == series.observations[j - 1].day_ordinal) {
      throw std::invalid_argument("duplicate timestamp `" +
                                  series.observations[j].date_iso + "`");
    }
  }
  return series;
}

FinancialSeries ingest_series_file(const std::string& path,
                                   const std::string& interval_label) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open series file `" + path + "`");
  return ingest_series(in, interval_label);
}

SeriesSojourns series_to_sojourns(const FinancialSeries& series) {
  if (series.observations.size() < 2) {
    throw std::invalid_argument("series needs at least 2 observations");
  }
  SeriesSojourns out;
  std::size_t last_event_index = 0;
  for (std::size_t j = 1; j < series.observations.size(); ++j) {
    const double diff = series.observations[j].value - series.observations[j - 1].value;
    if (diff == 0.0) {
      ++out.zero_changes_dropped;
      continue;
    }
    const bool birth = diff > 0.0;
    out.data.records.push_back(
        {1, static_cast<double>(j - last_event_index),
         birth ? sim::EventType::birth : sim::EventType::death});
    if (birth) {
      ++out.data.n_births;
    } else {
      ++out.data.n_deaths;
    }
    last_event_index = j;
  }
  if (out.data.records.empty()) {
    throw degenerate_data_error("every index change is zero; no events to fit");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization.
// ---------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

json cell_json(const GridCell& cell) {
  return json{{"alpha", cell.alpha}, {"lambda", cell.lambda}, {"mu", cell.mu}};
}

json config_json(const ExperimentConfig& config) {
  json sizes = json::array();
  for (std::size_t n : config.sample_sizes) sizes.push_back(n);
  json grid = json::array();
  for (const GridCell& cell : config.grid) grid.push_back(cell_json(cell));
  return json{{"model", model_name(config.model)},
              {"grid", grid},
              {"sample_sizes", sizes},
              {"replicates", config.replicates},
              {"level", config.level},
              {"seed", config.seed},
              {"exclude_zero_state", config.exclude_zero_state}};
}

}  // namespace

void write_bias_cv_csv(const BiasCvTable& table, std::ostream& out) {
  out << "schema_version,model,alpha,lambda,mu,n,estimator,bias_percent,cv_percent,"
         "replicates,failures\n";
  for (const BiasCvRow& row : table.rows) {
    out << schema_version << ',' << model_name(table.config.model) << ','
        << format_double(row.cell.alpha) << ',' << format_double(row.cell.lambda) << ','
        << format_double(row.cell.mu) << ',' << row.n << ',' << row.estimator << ','
        << format_double(row.bias_percent) << ','
        << (row.cv_percent ? format_double(*row.cv_percent) : "NA") << ','
        << row.replicates << ',' << row.failures << '\n';
  }
}

std::string bias_cv_json(const BiasCvTable& table) {
  json rows = json::array();
  for (const BiasCvRow& row : table.rows) {
    json r{{"alpha", row.cell.alpha}, {"lambda", row.cell.lambda},
           {"mu", row.cell.mu},       {"n", row.n},
           {"estimator", row.estimator}, {"bias_percent", row.bias_percent},
           {"replicates", row.replicates}, {"failures", row.failures}};
    if (row.cv_percent) {
      r["cv_percent"] = *row.cv_percent;
    } else {
      r["cv_percent"] = nullptr;
    }
    rows.push_back(std::move(r));
  }
  json doc{{"schema_version", schema_version},
           {"kind", "bias_cv"},
           {"config", config_json(table.config)},
           {"rows", rows}};
  return doc.dump(2) + "\n";
}

void write_coverage_csv(const CoverageTable& table, std::ostream& out) {
  out << "schema_version,model,alpha,lambda,mu,n,coverage_lambda,coverage_mu,"
         "replicates,failures\n";
  for (const CoverageRow& row : table.rows) {
    out << schema_version << ',' << model_name(table.config.model) << ','
        << format_double(row.cell.alpha) << ',' << format_double(row.cell.lambda) << ','
        << format_double(row.cell.mu) << ',' << row.n << ','
        << format_double(row.coverage_lambda) << ',' << format_double(row.coverage_mu)
        << ',' << row.replicates << ',' << row.failures << '\n';
  }
}

std::string coverage_json(const CoverageTable& table) {
  json rows = json::array();
  for (const CoverageRow& row : table.rows) {
    rows.push_back(json{{"alpha", row.cell.alpha},
                        {"lambda", row.cell.lambda},
                        {"mu", row.cell.mu},
                        {"n", row.n},
                        {"coverage_lambda", row.coverage_lambda},
                        {"coverage_mu", row.coverage_mu},
                        {"replicates", row.replicates},
                        {"failures", row.failures}});
  }
  json doc{{"schema_version", schema_version},
           {"kind", "coverage"},
           {"config", config_json(table.config)},
           {"rows", rows}};
  return doc.dump(2) + "\n";
}

void write_sojourns_csv(const sim::SojournData& data, std::ostream& out) {
  out << "state_before,duration,event_type\n";
  for (const auto& rec : data.records) {
    out << rec.state_before << ',' << format_double(rec.duration) << ','
        << (rec.type == sim::EventType::birth ? "birth" : "death") << '\n';
  }
}

sim::SojournData read_sojourns_csv(std::istream& in) {
  sim::SojournData data;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw std::invalid_argument("sojourn file is empty");
  ++line_no;
  if (strip(line) != "state_before,duration,event_type") {
    throw std::invalid_argument("line 1: expected header `state_before,duration,event_type`");
  }
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = strip(line);
    if (trimmed.empty()) continue;
    auto fields = split_csv_line(trimmed);
    if (fields.size() != 3) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": expected 3 fields");
    }
    sim::SojournRecord rec;
    try {
      rec.state_before = std::stol(strip(fields[0]));
      rec.duration = std::stod(strip(fields[1]));
    } catch (const std::exception&) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": unparseable number");
    }
    const std::string type = strip(fields[2]);
    if (type == "birth") {
      rec.type = sim::EventType::birth;
      ++data.n_births;
    } else if (type == "death") {
      rec.type = sim::EventType::death;
      ++data.n_deaths;
    } else {
      throw std::invalid_argument("line " + std::to_string(line_no) +
                                  ": event_type must be birth or death");
    }
    data.records.push_back(rec);
  }
  return data;
}

std::string estimation_json(const estimate::EstimationResult& est) {
  json doc{{"schema_version", schema_version},
           {"kind", "estimation"},
           {"model", model_name(est.model)},
           {"n", est.n},
           {"n_births", est.n_births},
           {"n_deaths", est.n_deaths},
           {"level", est.level},
           {"alpha_hat", est.alpha_hat},
           {"theta_hat", est.theta_hat},
           {"lambda_hat", est.lambda_hat},
           {"mu_hat", est.mu_hat},
           {"p_hat", est.p_hat},
           {"se_alpha", est.se_alpha},
           {"se_lambda", est.se_lambda},
           {"se_mu", est.se_mu},
           {"ci_alpha", json::array({est.ci_alpha.lo, est.ci_alpha.hi})},
           {"ci_lambda", json::array({est.ci_lambda.lo, est.ci_lambda.hi})},
           {"ci_mu", json::array({est.ci_mu.lo, est.ci_mu.hi})}};
  return doc.dump(2) + "\n";
}

void write_estimation_csv(const estimate::EstimationResult& est, std::ostream& out) {
  out << "schema_version,model,n,n_births,n_deaths,level,alpha_hat,theta_hat,lambda_hat,"
         "mu_hat,p_hat,se_alpha,se_lambda,se_mu,ci_alpha_lo,ci_alpha_hi,ci_lambda_lo,"
         "ci_lambda_hi,ci_mu_lo,ci_mu_hi\n";
  out << schema_version << ',' << model_name(est.model) << ',' << est.n << ','
      << est.n_births << ',' << est.n_deaths << ',' << format_double(est.level) << ','
      << format_double(est.alpha_hat) << ',' << format_double(est.theta_hat) << ','
      << format_double(est.lambda_hat) << ',' << format_double(est.mu_hat) << ','
      << format_double(est.p_hat) << ',' << format_double(est.se_alpha) << ','
      << format_double(est.se_lambda) << ',' << format_double(est.se_mu) << ','
      << format_double(est.ci_alpha.lo) << ',' << format_double(est.ci_alpha.hi) << ','
      << format_double(est.ci_lambda.lo) << ',' << format_double(est.ci_lambda.hi) << ','
      << format_double(est.ci_mu.lo) << ',' << format_double(est.ci_mu.hi) << '\n';
}

void write_transient_csv(const std::vector<TransientRow>& rows, std::ostream& out) {
  out << "k,t,probability,terms_used\n";
  for (const TransientRow& row : rows) {
    out << row.k << ',' << format_double(row.t) << ',' << format_double(row.probability)
        << ',' << row.terms_used << '\n';
  }
}

std::string transient_json(const std::vector<TransientRow>& rows) {
  json arr = json::array();
  for (const TransientRow& row : rows) {
    arr.push_back(json{{"k", row.k},
                       {"t", row.t},
                       {"probability", row.probability},
                       {"terms_used", row.terms_used}});
  }
  json doc{{"schema_version", schema_version}, {"kind", "transient"}, {"rows", arr}};
  return doc.dump(2) + "\n";
}

}  // namespace fracq::harness
